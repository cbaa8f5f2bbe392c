"""Validates every preset in a config directory against experiment.schema.json."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1])
schema = json.loads((root / "experiment.schema.json").read_text())
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)
bad = 0
for path in sorted(root.glob("*.json")):
    if path.name == "experiment.schema.json":
        continue
    errors = list(validator.iter_errors(json.loads(path.read_text())))
    for e in errors:
        print(f"{path.name}: {e.message}")
    bad += bool(errors)
    print(f"{path.name}: {'ok' if not errors else 'INVALID'}")
sys.exit(1 if bad else 0)

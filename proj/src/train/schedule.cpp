#include "atlt/train/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "atlt/core/errors.hpp"

namespace atlt::train {

Schedule Schedule::piecewise(std::vector<int> milestones, double factor, double initial_lr) {
  Schedule s;
  s.kind = Kind::Piecewise;
  s.milestones = std::move(milestones);
  s.factor = factor;
  s.initial_lr = initial_lr;
  return s;
}

Schedule Schedule::constant(double initial_lr) {
  Schedule s;
  s.kind = Kind::Constant;
  s.initial_lr = initial_lr;
  s.milestones.clear();
  return s;
}

Schedule Schedule::robal_paper(double initial_lr) {
  Schedule s;
  s.kind = Kind::RobalPaper;
  s.initial_lr = initial_lr;
  s.milestones = {60, 70};
  return s;
}

Schedule Schedule::robal_code(double initial_lr) {
  Schedule s;
  s.kind = Kind::RobalCode;
  s.initial_lr = initial_lr;
  s.milestones.clear();
  return s;
}

void Schedule::validate() const {
  if (!(initial_lr >= 0.0) || !std::isfinite(initial_lr)) throw ConfigError("initial learning rate must be finite and >= 0");
  if (kind != Kind::Piecewise) return;
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("schedule factor must lie in (0,1)");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] < 1) throw ConfigError("schedule milestones must be >= 1");
    if (i > 0 && milestones[i] <= milestones[i - 1]) throw ConfigError("schedule milestones must be strictly increasing");
  }
}

std::string schedule_kind_name(Schedule::Kind kind) {
  switch (kind) {
    case Schedule::Kind::Piecewise: return "piecewise";
    case Schedule::Kind::RobalPaper: return "robal_paper";
    case Schedule::Kind::RobalCode: return "robal_code";
    case Schedule::Kind::Constant: return "constant";
  }
  return "unknown";
}

Schedule::Kind parse_schedule_kind(const std::string& name) {
  if (name == "piecewise") return Schedule::Kind::Piecewise;
  if (name == "robal_paper") return Schedule::Kind::RobalPaper;
  if (name == "robal_code") return Schedule::Kind::RobalCode;
  if (name == "constant") return Schedule::Kind::Constant;
  throw ConfigError("unknown schedule '" + name + "' (expected piecewise, robal_paper, robal_code or constant)");
}

void to_json(nlohmann::json& j, const Schedule& s) {
  j = {{"kind", schedule_kind_name(s.kind)}, {"initial_lr", s.initial_lr}};
  if (s.kind == Schedule::Kind::Piecewise) {
    j["milestones"] = s.milestones;
    j["factor"] = s.factor;
  }
}

void from_json(const nlohmann::json& j, Schedule& s) {
  if (!j.is_object()) throw ConfigError("schedule must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "kind" && k != "initial_lr" && k != "milestones" && k != "factor") throw ConfigError("unknown schedule key '" + k + "'");
  }
  const auto kind = parse_schedule_kind(j.value("kind", std::string("piecewise")));
  const double lr = j.value("initial_lr", 0.1);
  switch (kind) {
    case Schedule::Kind::Piecewise:
      s = Schedule::piecewise(j.value("milestones", std::vector<int>{75, 90}), j.value("factor", 0.1), lr);
      break;
    case Schedule::Kind::RobalPaper: s = Schedule::robal_paper(lr); break;
    case Schedule::Kind::RobalCode: s = Schedule::robal_code(lr); break;
    case Schedule::Kind::Constant: s = Schedule::constant(lr); break;
  }
  if (kind != Schedule::Kind::Piecewise && (j.contains("milestones") || j.contains("factor"))) {
    throw ConfigError("milestones/factor only apply to the piecewise schedule");
  }
  s.validate();
}

namespace {

// initial / d^k rather than initial * f^k: dividing by the exact integer 10
// lands on the nearest double to 0.01, 0.001, ... where repeated
// multiplication by 0.1 drifts by an ulp.
double decayed(double initial, double inverse_factor, int k) {
  return k == 0 ? initial : initial / std::pow(inverse_factor, k);
}

}  // namespace

double lr_at(const Schedule& s, int epoch) {
  if (epoch < 1) throw ConfigError("lr_at: epochs are 1-based, got " + std::to_string(epoch));
  switch (s.kind) {
    case Schedule::Kind::Constant: return s.initial_lr;
    case Schedule::Kind::Piecewise: {
      int k = 0;
      for (int m : s.milestones)
        if (epoch >= m) ++k;
      return decayed(s.initial_lr, 1.0 / s.factor, k);
    }
    case Schedule::Kind::RobalPaper: {
      const int k = (epoch >= 60 ? 1 : 0) + (epoch >= 70 ? 1 : 0);
      return decayed(s.initial_lr, 10.0, k);
    }
    case Schedule::Kind::RobalCode: {
      const int tenths = std::clamp(epoch - 60, 0, 15);
      const int hundredths = std::max(epoch - 75, 0);
      return decayed(s.initial_lr, 10.0, tenths + 2 * hundredths);
    }
  }
  return s.initial_lr;
}

}  // namespace atlt::train

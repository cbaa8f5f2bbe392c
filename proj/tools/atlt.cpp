#include "atlt/cli/cli.hpp"

int main(int argc, char** argv) { return atlt::cli::run(argc, argv); }

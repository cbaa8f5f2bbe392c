#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace atlt::train {

/// Learning-rate schedule over 1-based epochs.
///
///   piecewise    lr multiplied by `factor` from each milestone epoch onwards
///   robal_paper  x0.1 from epoch 60 and again from epoch 70
///   robal_code   x0.1 per epoch for epochs 61..75, then x0.01 per epoch
///   constant     initial_lr throughout
struct Schedule {
  enum class Kind { Piecewise, RobalPaper, RobalCode, Constant };

  Kind kind = Kind::Piecewise;
  double initial_lr = 0.1;
  std::vector<int> milestones = {75, 90};
  double factor = 0.1;

  static Schedule piecewise(std::vector<int> milestones, double factor, double initial_lr);
  static Schedule constant(double initial_lr);
  static Schedule robal_paper(double initial_lr);
  static Schedule robal_code(double initial_lr);

  void validate() const;
};

std::string schedule_kind_name(Schedule::Kind kind);
Schedule::Kind parse_schedule_kind(const std::string& name);

void to_json(nlohmann::json& j, const Schedule& s);
void from_json(const nlohmann::json& j, Schedule& s);

double lr_at(const Schedule& schedule, int epoch);

}  // namespace atlt::train

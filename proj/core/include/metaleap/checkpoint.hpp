#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "metaleap/model.hpp"
#include "metaleap/parameters.hpp"

namespace metaleap {

inline constexpr const char* kCheckpointMagic = "MLCP1";

struct Checkpoint {
  RegressorConfig config;
  ParameterVector theta;
};

/// Text format: `MLCP1`, a `config key=value ...` line, then for each segment
/// a `name ndim d1 d2 ...` line followed by one line of values printed with 17
/// significant digits.
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

/// Names of the RegressorConfig fields that differ; empty when they match.
std::vector<std::string> config_differences(const RegressorConfig& a, const RegressorConfig& b);

}  // namespace metaleap

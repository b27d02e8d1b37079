#pragma once

#include "nhgm/core.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace nhgm {

struct IndexedValue {
  std::vector<int> indices;
  double value = 0.0;  // raw, unnormalized
};

struct CheckEntry {
  std::string id;
  bool pass = true;
  double max_violation = 0.0;
  double tolerance = 0.0;
  std::optional<Vec> witness_q;
  std::vector<int> witness_indices;
  std::optional<double> witness_value;  // raw value at the witness
  std::vector<IndexedValue> witness_table;  // every violating index tuple at the witness
  int samples_used = 0;
  int samples_skipped = 0;
};

struct CheckReport {
  std::string system;
  std::vector<CheckEntry> checks;
  bool verdict = true;  // Theorem-Main hypotheses hold

  const CheckEntry* find(const std::string& id) const;
};

struct CheckOptions {
  int samples = 200;
  double tol = 1e-8;
};

// Violation of one check at a single point: normalized maximum, arg-max
// indices and the raw value there.
struct PointViolation {
  double normalized = 0.0;
  std::vector<int> indices;
  double raw = 0.0;
  std::vector<IndexedValue> table;
};

PointViolation point_violation(const SystemSpec& spec, const std::string& check_id, const Vec& q, double tol = 0.0);

CheckEntry check_dimension_assumption(const SystemSpec& spec, const CheckOptions& opt = {});
CheckEntry check_s_orthogonality(const SystemSpec& spec, const CheckOptions& opt = {});
CheckEntry check_strong_invariance(const SystemSpec& spec, const CheckOptions& opt = {});
CheckEntry check_x0_condition(const SystemSpec& spec, const CheckOptions& opt = {});
CheckEntry check_invariance_of_frame(const SystemSpec& spec, const CheckOptions& opt = {});
CheckReport full_report(const SystemSpec& spec, const CheckOptions& opt = {});

nlohmann::json to_json(const CheckReport& report);

}  // namespace nhgm

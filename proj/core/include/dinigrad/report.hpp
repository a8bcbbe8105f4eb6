#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "dinigrad/dynsys.hpp"
#include "dinigrad/estimator.hpp"
#include "dinigrad/pipeline.hpp"
#include "dinigrad/potential.hpp"
#include "dinigrad/props.hpp"

namespace dinigrad {

/// Fixed 17-significant-digit decimal form used by every CSV writer.
std::string format_real(double x);

/// Columns r, R_11 .. R_nn (row-major), mu, E.
void write_estimator_csv(std::ostream& os, const ReducedCurve& rc, const EstimatorCurve& ec);
/// Columns t, phi_1 .. phi_n, psi_1 .. psi_n.
void write_trajectories_csv(std::ostream& os, const BlockSolution& sol);
/// Columns r, k, m, coefficient with m the position within degree k.
void write_field_snapshot_csv(std::ostream& os, const ModalField& f);
/// Columns j, r, M2_grad, E, ratio, verdict.
void write_ratio_csv(std::ostream& os, const RatioReport& rep);
/// Columns r, v, E, ratio.
void write_sharpness_csv(std::ostream& os, const SharpnessReport& rep);
/// Columns module, check, value, tolerance, verdict.
void write_props_csv(std::ostream& os, const PropsReport& rep);

/// Run manifest: named sections of scalar or list entries, written as JSON
/// with sorted keys so identical runs give identical bytes.
class Manifest {
 public:
  using Value = std::variant<double, std::int64_t, std::uint64_t, bool, std::string, std::vector<double>,
                             std::vector<std::string>>;

  void set(const std::string& section, const std::string& key, Value value);
  /// Stores the scenario JSON verbatim under "config".
  void set_config(const std::string& scenario_json);
  std::string dump() const;

 private:
  std::map<std::string, std::map<std::string, Value>> sections_;
  std::string config_;
};

/// Writes `text` to dir/name, creating dir when missing. Returns the path.
std::string write_text_file(const std::string& dir, const std::string& name, const std::string& text);

}  // namespace dinigrad

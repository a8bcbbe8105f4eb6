#include "dinigrad/report.hpp"

#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "json.hpp"

namespace dinigrad {

std::string format_real(double x) { return fmt::format("{:.17g}", x); }

void write_estimator_csv(std::ostream& os, const ReducedCurve& rc, const EstimatorCurve& ec) {
  const int n = rc.R.empty() ? 0 : static_cast<int>(rc.R.front().rows());
  os << "r";
  for (int a = 1; a <= n; ++a)
    for (int b = 1; b <= n; ++b) os << ",R_" << a << b;
  os << ",mu,E\n";
  for (std::size_t j = 0; j < rc.R.size(); ++j) {
    os << format_real(rc.grid->r(j));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) os << ',' << format_real(rc.R[j](a, b));
    os << ',' << format_real(rc.mu[j]) << ',' << format_real(ec.at_node(j)) << '\n';
  }
}

void write_trajectories_csv(std::ostream& os, const BlockSolution& sol) {
  const int n = sol.phi.empty() ? 0 : static_cast<int>(sol.phi.front().size());
  os << "t";
  for (int c = 1; c <= n; ++c) os << ",phi_" << c;
  for (int c = 1; c <= n; ++c) os << ",psi_" << c;
  os << '\n';
  for (std::size_t i = 0; i < sol.t.size(); ++i) {
    os << format_real(sol.t[i]);
    for (int c = 0; c < n; ++c) os << ',' << format_real(sol.phi[i][c]);
    for (int c = 0; c < n; ++c) os << ',' << format_real(sol.psi[i][c]);
    os << '\n';
  }
}

void write_field_snapshot_csv(std::ostream& os, const ModalField& f) {
  os << "r,k,m,coefficient\n";
  for (std::size_t j = 0; j < f.radii(); ++j) {
    const std::string r = format_real(f.grid->r(j));
    for (std::size_t idx = 0; idx < f.modes(); ++idx) {
      const int k = f.basis->degree(idx);
      os << r << ',' << k << ',' << idx - f.basis->offset(k) << ',' << format_real(f.c(idx, j)) << '\n';
    }
  }
}

void write_ratio_csv(std::ostream& os, const RatioReport& rep) {
  os << "j,r,M2_grad,E,ratio,verdict\n";
  for (const RatioRow& row : rep.rows) {
    os << row.j << ',' << format_real(row.r) << ',' << format_real(row.m2_grad) << ',' << format_real(row.estimator)
       << ',' << format_real(row.ratio) << ',' << (row.pass ? "PASS" : "FAIL") << '\n';
  }
}

void write_sharpness_csv(std::ostream& os, const SharpnessReport& rep) {
  os << "r,v,E,ratio\n";
  for (std::size_t q = 0; q < rep.radii.size(); ++q) {
    os << format_real(rep.radii[q]) << ',' << format_real(rep.v[q]) << ',' << format_real(rep.estimator[q]) << ','
       << format_real(rep.ratio[q]) << '\n';
  }
}

void write_props_csv(std::ostream& os, const PropsReport& rep) {
  os << "module,check,value,tolerance,verdict\n";
  for (const PropCheck& c : rep.checks) {
    os << c.module << ",\"" << c.name << "\"," << format_real(c.value) << ','
       << format_real(c.tolerance * rep.tolerance_scale) << ',' << (c.passed ? "PASS" : "FAIL") << '\n';
  }
}

void Manifest::set(const std::string& section, const std::string& key, Value value) {
  sections_[section][key] = std::move(value);
}

void Manifest::set_config(const std::string& scenario_json) { config_ = scenario_json; }

std::string Manifest::dump() const {
  nlohmann::json doc = nlohmann::json::object();
  if (!config_.empty()) doc["config"] = nlohmann::json::parse(config_);
  for (const auto& [section, entries] : sections_) {
    nlohmann::json& s = doc[section];
    s = nlohmann::json::object();
    for (const auto& [key, value] : entries) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              s[key] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_real(v));
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
              nlohmann::json arr = nlohmann::json::array();
              for (double x : v) arr.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(format_real(x)));
              s[key] = arr;
            } else {
              s[key] = v;
            }
          },
          value);
    }
  }
  return doc.dump(2) + "\n";
}

std::string write_text_file(const std::string& dir, const std::string& name, const std::string& text) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
  return path.string();
}

}  // namespace dinigrad

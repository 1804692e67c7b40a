#pragma once

#include "fedzen/solver.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace fedzen {

inline constexpr const char* kTraceHeader =
    "iter,evals,f_value,f_gap,grad_norm_est,r_used,alpha,step_norm,x_err,hess_err_fro,"
    "up_scalars,down_scalars";

namespace detail {

inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_real(*v) : std::string(); }
inline std::string fmt_opt(const std::optional<std::uint64_t>& v) {
  return v ? std::to_string(*v) : std::string();
}

}  // namespace detail

/// One line per record; fields without ground truth stay empty. Reals use
/// 17 significant digits, which round-trips doubles.
inline void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  using detail::fmt_opt;
  using detail::fmt_real;
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.k << ',' << r.evals << ',' << fmt_real(r.f_value) << ',' << fmt_opt(r.f_gap) << ','
        << fmt_real(r.grad_norm_est) << ',' << r.r_used << ',' << fmt_real(r.alpha) << ','
        << fmt_real(r.step_norm) << ',' << fmt_opt(r.x_err) << ',' << fmt_opt(r.hess_err_fro) << ','
        << fmt_opt(r.up_scalars) << ',' << fmt_opt(r.down_scalars) << '\n';
  }
}

inline void write_trace_csv(const RunTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  write_trace_csv(trace, out);
  if (!out) throw std::runtime_error("write_trace_csv: write failed for " + path);
}

}  // namespace fedzen

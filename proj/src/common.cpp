#include "tradebench/common.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace tradebench {

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf);
}

double Rng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::student_t(int nu) {
  const double z = normal();
  double chi2 = 0.0;
  for (int i = 0; i < nu; ++i) {
    const double g = normal();
    chi2 += g * g;
  }
  return z / std::sqrt(chi2 / static_cast<double>(nu));
}

double Rng::unit_student_t(int nu) {
  // Var(t_nu) = nu / (nu - 2); requires nu > 2.
  const double scale = std::sqrt(static_cast<double>(nu) / (nu - 2.0));
  return student_t(nu) / scale;
}

double Rng::lognormal(double mu, double sigma) {
  return std::exp(mu + sigma * normal());
}

std::string format_full(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  // %.17g round-trips; shorten when fewer digits already round-trip so the
  // files stay readable.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, value);
    double parsed = 0.0;
    std::sscanf(shorter, "%lf", &parsed);
    if (parsed == value) return std::string(shorter);
  }
  return std::string(buf);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return std::string(buf);
}

}  // namespace tradebench

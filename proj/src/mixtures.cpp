#include "mixlab/mixtures.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mixlab/error.hpp"

namespace mixlab {

namespace {

double kahan_sum(std::span<const double> xs) {
  double sum = 0.0;
  double carry = 0.0;
  for (double x : xs) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

void check_non_negative(std::span<const double> raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!(raw[i] >= 0.0) || !std::isfinite(raw[i])) {
      throw Error(Errc::NegativeEntry,
                  "entry " + std::to_string(i) + " = " + std::to_string(raw[i]));
    }
  }
}

}  // namespace

MixtureWeights MixtureWeights::validate(std::vector<double> raw) {
  if (raw.empty()) throw Error(Errc::DegenerateCatalog, "mixture has no entries");
  check_non_negative(raw);
  const double sum = kahan_sum(raw);
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "entries sum to " << sum;
    throw Error(Errc::NotNormalized, msg.str());
  }
  return MixtureWeights(std::move(raw));
}

MixtureWeights MixtureWeights::normalize(std::vector<double> raw) {
  if (raw.empty()) throw Error(Errc::DegenerateCatalog, "mixture has no entries");
  check_non_negative(raw);
  const double sum = kahan_sum(raw);
  if (!(sum > 0.0)) throw Error(Errc::NotNormalized, "cannot normalize a zero vector");
  for (double& x : raw) x /= sum;
  return MixtureWeights(std::move(raw));
}

std::vector<std::size_t> MixtureWeights::support() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] > 0.0) out.push_back(i);
  }
  return out;
}

MixtureWeights seed_single(std::size_t index, std::size_t m) {
  if (m == 0) throw Error(Errc::DegenerateCatalog, "m = 0");
  if (index >= m) {
    throw Error(Errc::IndexOutOfRange,
                "index " + std::to_string(index) + " with m = " + std::to_string(m));
  }
  std::vector<double> w(m, 0.0);
  w[index] = 1.0;
  return MixtureWeights::validate(std::move(w));
}

MixtureWeights seed_exclude_one(std::size_t index, std::size_t m) {
  if (m < 2) throw Error(Errc::DegenerateCatalog, "exclude-one needs m >= 2");
  if (index >= m) {
    throw Error(Errc::IndexOutOfRange,
                "index " + std::to_string(index) + " with m = " + std::to_string(m));
  }
  std::vector<double> w(m, 1.0 / static_cast<double>(m - 1));
  w[index] = 0.0;
  return MixtureWeights::validate(std::move(w));
}

MixtureWeights seed_all(std::size_t m) {
  if (m == 0) throw Error(Errc::DegenerateCatalog, "m = 0");
  return MixtureWeights::validate(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

MixtureWeights blend(const MixtureWeights& a, const MixtureWeights& b, double t) {
  if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "blend of unequal sizes");
  if (!(t >= 0.0 && t <= 1.0)) throw Error(Errc::InvalidArgument, "blend factor outside [0,1]");
  std::vector<double> w(a.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = t * a[i] + (1.0 - t) * b[i];
  return MixtureWeights::validate(std::move(w));
}

DomainCatalog::DomainCatalog(std::vector<Domain> domains) : domains_(std::move(domains)) {
  if (domains_.empty()) throw Error(Errc::DegenerateCatalog, "catalog is empty");
  std::set<std::string> names;
  for (const auto& d : domains_) {
    if (!names.insert(d.name).second) {
      throw Error(Errc::InvalidSpec, "duplicate domain name '" + d.name + "'");
    }
    if (d.pool_size == 0) throw Error(Errc::InvalidSpec, "domain '" + d.name + "' has empty pool");
  }
}

std::vector<std::size_t> DomainCatalog::pool_sizes() const {
  std::vector<std::size_t> out;
  out.reserve(domains_.size());
  for (const auto& d : domains_) out.push_back(d.pool_size);
  return out;
}

std::string format_mixture_line(std::span<const double> weights) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (i) out += ',';
    std::snprintf(buf, sizeof buf, "%.10g", weights[i]);
    out += buf;
  }
  return out;
}

MixtureWeights parse_mixture_line(const std::string& line) {
  std::vector<double> raw;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      raw.push_back(std::stod(cell, &used));
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(Errc::MalformedLine, "bad mixture entry '" + cell + "'");
    }
  }
  // Written files carry 10 significant digits, so re-normalize only the
  // rounding residue; anything larger is a real error.
  const double sum = kahan_sum(raw);
  if (std::abs(sum - 1.0) <= 1e-8 && std::abs(sum - 1.0) > kSimplexTolerance) {
    return MixtureWeights::normalize(std::move(raw));
  }
  return MixtureWeights::validate(std::move(raw));
}

MixtureWeights read_mixture_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) return parse_mixture_line(line);
  }
  throw Error(Errc::MalformedLine, "no mixture line in " + path);
}

void write_mixture_file(const std::string& path, const MixtureWeights& w) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << format_mixture_line(w.values()) << '\n';
}

}  // namespace mixlab

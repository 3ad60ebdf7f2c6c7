#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mixlab {

inline constexpr double kSimplexTolerance = 1e-9;

/// A point on the probability simplex over the catalog's domains.
/// Construct through validate() or the seed generators; the invariants
/// (non-negative, sums to one within kSimplexTolerance) hold for every
/// instance.
class MixtureWeights {
 public:
  static MixtureWeights validate(std::vector<double> raw);

  /// Divides by the sum after checking non-negativity. Used where an
  /// algorithm explicitly normalizes (candidate search, heuristics);
  /// user-supplied weights go through validate().
  static MixtureWeights normalize(std::vector<double> raw);

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> values() const noexcept { return weights_; }
  const std::vector<double>& vector() const noexcept { return weights_; }

  /// Indices with strictly positive weight.
  std::vector<std::size_t> support() const;

  friend bool operator==(const MixtureWeights&, const MixtureWeights&) = default;

 private:
  explicit MixtureWeights(std::vector<double> w) : weights_(std::move(w)) {}
  std::vector<double> weights_;
};

MixtureWeights seed_single(std::size_t index, std::size_t m);
MixtureWeights seed_exclude_one(std::size_t index, std::size_t m);
MixtureWeights seed_all(std::size_t m);

/// Convex combination t*a + (1-t)*b, t in [0,1].
MixtureWeights blend(const MixtureWeights& a, const MixtureWeights& b, double t);

enum class RewardKind { ExactMatch, Iou };

struct Domain {
  std::string name;
  std::size_t pool_size = 0;
  RewardKind reward = RewardKind::ExactMatch;
};

/// Ordered domain list; position i is the meaning of weight entry i.
class DomainCatalog {
 public:
  explicit DomainCatalog(std::vector<Domain> domains);

  std::size_t size() const noexcept { return domains_.size(); }
  const Domain& operator[](std::size_t i) const { return domains_[i]; }
  std::span<const Domain> domains() const noexcept { return domains_; }
  std::vector<std::size_t> pool_sizes() const;

 private:
  std::vector<Domain> domains_;
};

/// Mixture file: one line of comma-separated decimals, 10 significant digits.
std::string format_mixture_line(std::span<const double> weights);
MixtureWeights parse_mixture_line(const std::string& line);
MixtureWeights read_mixture_file(const std::string& path);
void write_mixture_file(const std::string& path, const MixtureWeights& w);

}  // namespace mixlab

#pragma once

// Trait data model: per-trait typing, the latent-dimension layout it
// induces, and the deterministic map from latent coordinates to
// observed traits (sign rule for binary, argmax rule for categorical).

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace phzz {

enum class TraitKind { Continuous, Binary, Categorical };

struct Trait {
  std::string name;
  TraitKind kind = TraitKind::Continuous;
  // Categorical only: ordered class labels, first is the reference class.
  std::vector<std::string> classes;

  int num_classes() const { return static_cast<int>(classes.size()); }
};

struct TraitSpec {
  std::vector<Trait> traits;

  static Trait continuous(std::string name) {
    return Trait{std::move(name), TraitKind::Continuous, {}};
  }
  static Trait binary(std::string name) {
    return Trait{std::move(name), TraitKind::Binary, {}};
  }
  static Trait categorical(std::string name, std::vector<std::string> classes) {
    return Trait{std::move(name), TraitKind::Categorical, std::move(classes)};
  }
};

// Latent width of one trait: 1 for continuous/binary, m-1 for categorical.
inline int latent_width(const Trait& t) {
  switch (t.kind) {
    case TraitKind::Continuous:
    case TraitKind::Binary:
      return 1;
    case TraitKind::Categorical:
      return t.num_classes() - 1;
  }
  return 0;
}

// One observed trait value. Continuous traits hold `value`; binary traits
// hold `sign` in {-1,+1}; categorical traits hold `category` (0-based class
// index, 0 = reference). Missing values are encoded as nullopt.
struct TraitValue {
  std::optional<double> value;
  std::optional<int> sign;
  std::optional<int> category;

  bool missing() const { return !value && !sign && !category; }

  static TraitValue na() { return {}; }
  static TraitValue cont(double v) { return {v, {}, {}}; }
  static TraitValue bin(int s) { return {{}, s, {}}; }
  static TraitValue cat(int k) { return {{}, {}, k}; }
};

using TraitRow = std::vector<TraitValue>;

enum class LatentRole {
  Free,             // unconstrained (missing discrete obs, or NA continuous)
  Fixed,            // observed continuous value, never moves
  BinarySign,       // sign constrained to `sign`
  CategoricalSlot,  // one of m-1 slots of a categorical trait
};

struct LatentDim {
  int trait = -1;        // owner trait index
  LatentRole role = LatentRole::Free;
  int sign = 0;          // BinarySign: observed sign in {-1,+1}
  int slot = 0;          // CategoricalSlot: 0-based slot within the trait
  int obs_class = 0;     // CategoricalSlot: observed 0-based class index
  double fixed_value = 0.0;  // Fixed only
};

// Per-taxon latent layout: which column belongs to which trait and what
// wall (if any) the observation imposes on it.
class ConstraintMap {
 public:
  ConstraintMap(const TraitSpec& spec, const TraitRow& row)
      : spec_(&spec) {
    offsets_.reserve(spec.traits.size());
    int q = 0;
    for (const auto& t : spec.traits) {
      if (t.kind == TraitKind::Categorical && t.num_classes() < 3)
        throw std::invalid_argument(
            "categorical trait '" + t.name + "' needs >= 3 classes");
      offsets_.push_back(q);
      q += latent_width(t);
    }
    if (spec.traits.empty())
      throw std::invalid_argument("empty trait specification");
    if (row.size() != spec.traits.size())
      throw std::invalid_argument("trait row width mismatch");
    dims_.resize(q);
    for (std::size_t j = 0; j < spec.traits.size(); ++j) {
      const Trait& t = spec.traits[j];
      const TraitValue& y = row[j];
      int off = offsets_[j];
      switch (t.kind) {
        case TraitKind::Continuous:
          if (y.missing()) {
            dims_[off] = {int(j), LatentRole::Free, 0, 0, 0, 0.0};
          } else {
            dims_[off] = {int(j), LatentRole::Fixed, 0, 0, 0, *y.value};
          }
          break;
        case TraitKind::Binary:
          if (y.missing()) {
            dims_[off] = {int(j), LatentRole::Free, 0, 0, 0, 0.0};
          } else {
            dims_[off] = {int(j), LatentRole::BinarySign, *y.sign, 0, 0, 0.0};
          }
          break;
        case TraitKind::Categorical: {
          int w = latent_width(t);
          if (y.missing()) {
            for (int s = 0; s < w; ++s)
              dims_[off + s] = {int(j), LatentRole::Free, 0, s, 0, 0.0};
          } else {
            for (int s = 0; s < w; ++s)
              dims_[off + s] =
                  {int(j), LatentRole::CategoricalSlot, 0, s, *y.category, 0.0};
          }
          break;
        }
      }
    }
  }

  int dim() const { return static_cast<int>(dims_.size()); }
  const LatentDim& operator[](int i) const { return dims_[i]; }
  int trait_offset(int trait) const { return offsets_[trait]; }
  const TraitSpec& spec() const { return *spec_; }

 private:
  const TraitSpec* spec_;
  std::vector<int> offsets_;
  std::vector<LatentDim> dims_;
};

// Total latent dimension q and per-trait offsets induced by a TraitSpec.
struct Layout {
  int q = 0;
  std::vector<int> offsets;
  std::vector<int> widths;
};

inline Layout layout(const TraitSpec& spec) {
  if (spec.traits.empty())
    throw std::invalid_argument("empty trait specification");
  Layout l;
  for (const auto& t : spec.traits) {
    if (t.kind == TraitKind::Categorical && t.num_classes() < 3)
      throw std::invalid_argument(
          "categorical trait '" + t.name + "' needs >= 3 classes");
    l.offsets.push_back(l.q);
    l.widths.push_back(latent_width(t));
    l.q += latent_width(t);
  }
  return l;
}

struct BoundaryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Threshold map from one latent row to the observed trait row. Exact
// zeros at walls and exact categorical ties are measure-zero; rejected.
inline TraitRow map_latent(const Eigen::VectorXd& x, const TraitSpec& spec) {
  Layout l = layout(spec);
  if (x.size() != l.q) throw std::invalid_argument("latent row size mismatch");
  TraitRow out;
  out.reserve(spec.traits.size());
  for (std::size_t j = 0; j < spec.traits.size(); ++j) {
    const Trait& t = spec.traits[j];
    int off = l.offsets[j];
    switch (t.kind) {
      case TraitKind::Continuous:
        out.push_back(TraitValue::cont(x[off]));
        break;
      case TraitKind::Binary:
        if (x[off] == 0.0) throw BoundaryError("binary latent exactly on wall");
        out.push_back(TraitValue::bin(x[off] > 0 ? 1 : -1));
        break;
      case TraitKind::Categorical: {
        int w = l.widths[j];
        int argmax = 0;
        double best = x[off];
        bool tie = false;
        for (int s = 1; s < w; ++s) {
          if (x[off + s] == best) tie = true;
          if (x[off + s] > best) {
            best = x[off + s];
            argmax = s;
            tie = false;
          }
        }
        if (best == 0.0) throw BoundaryError("categorical latent exactly on wall");
        if (best < 0.0) {
          out.push_back(TraitValue::cat(0));  // reference class
        } else {
          if (tie) throw BoundaryError("categorical latent argmax tie");
          out.push_back(TraitValue::cat(argmax + 1));
        }
        break;
      }
    }
  }
  return out;
}

// Indicator p(Y|X): true iff the latent matrix maps to the observed data,
// Fixed dims equal their observed continuous values, and missing entries
// impose nothing.
inline bool check_consistency_row(const Eigen::VectorXd& x,
                                  const ConstraintMap& cmap) {
  for (int i = 0; i < cmap.dim(); ++i) {
    const LatentDim& d = cmap[i];
    switch (d.role) {
      case LatentRole::Free:
        break;
      case LatentRole::Fixed:
        if (x[i] != d.fixed_value) return false;
        break;
      case LatentRole::BinarySign:
        if (x[i] * d.sign <= 0.0) return false;
        break;
      case LatentRole::CategoricalSlot: {
        // check once, from slot 0
        if (d.slot != 0) break;
        const Trait& t = cmap.spec().traits[d.trait];
        int off = cmap.trait_offset(d.trait);
        int w = latent_width(t);
        if (d.obs_class == 0) {
          for (int s = 0; s < w; ++s)
            if (x[off + s] >= 0.0) return false;
        } else {
          int kslot = d.obs_class - 1;  // slot holding the observed class
          double xm = x[off + kslot];
          if (xm <= 0.0) return false;
          for (int s = 0; s < w; ++s)
            if (s != kslot && x[off + s] >= xm) return false;
        }
        break;
      }
    }
  }
  return true;
}

inline bool check_consistency(const Eigen::MatrixXd& X,
                              const std::vector<ConstraintMap>& maps) {
  if (X.rows() != static_cast<Eigen::Index>(maps.size())) return false;
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    if (!check_consistency_row(X.row(r).transpose(), maps[r])) return false;
  return true;
}

}  // namespace phzz

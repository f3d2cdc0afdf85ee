#ifndef UNIADAPT_DATA_SYNTH_HPP
#define UNIADAPT_DATA_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "uniadapt/matrix.hpp"

namespace uniadapt::data {

enum class Domain { source, target };

std::string to_string(Domain d);
Domain parse_domain(const std::string& text);

// Label-set algebra of a two-domain problem. Global class ids are assigned
// shared first (0..n_shared-1), then source-private, then target-private, so
// the source label set is exactly 0..K-1 with K = n_shared + n_source_private
// and every id >= K is target-private ("unknown" from the source's view).
struct LabelSplit {
  std::size_t n_shared = 0;
  std::size_t n_source_private = 0;
  std::size_t n_target_private = 0;

  std::size_t num_source_classes() const { return n_shared + n_source_private; }
  std::size_t num_total_classes() const {
    return n_shared + n_source_private + n_target_private;
  }
  std::vector<int> source_classes() const;
  std::vector<int> target_classes() const;
  std::vector<int> shared_classes() const;
};

void validate(const LabelSplit& split);

struct LabeledDataset {
  Matrix features;          // N x D_in
  std::vector<int> labels;  // global class ids; for the target domain these
                            // exist for evaluation only and must not reach
                            // the training losses
  Domain domain = Domain::source;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
};

// How the two domains differ. Every class is an isotropic Gaussian around
// its mean (cov_scale = per-dimension standard deviation; 0 collapses the
// cluster to a point, which the degenerate no-shift tests rely on). Target
// samples additionally get their first two coordinates rotated by
// rotation_rad and the whole vector shifted by translation.
struct ShiftSpec {
  Matrix means;                     // num_total_classes x D_in
  double cov_scale = 1.0;           // >= 0
  double rotation_rad = 0.0;        // in [0, 2*pi)
  std::vector<double> translation;  // empty means zero shift
  std::size_t samples_per_class = 50;  // per class per domain
  std::uint64_t seed = 0;
};

// Default mean layout for C classes in D dimensions (D >= 2):
//   dims 0-1: circle of the given radius, class k at angle 2*pi*k/C. This is
//     the plane the target rotation acts on, so these coordinates shift
//     between domains.
//   dims 2-3 (when D >= 4): a second circle of the same radius with a
//     winding number coprime to C, untouched by the rotation. It keeps class
//     identities unambiguous under rotations comparable to the class spacing
//     of the first circle; without it a 30-degree turn of a crowded circle
//     maps some classes onto their neighbors and no method could tell them
//     apart.
//   remaining dims: zero (pure noise directions).
Matrix class_means(std::size_t num_classes, std::size_t dims, double radius = 5.0);

// Smallest winding number q >= max(1, round(0.382*C)) with gcd(q, C) = 1.
std::size_t identity_winding(std::size_t num_classes);

std::pair<LabeledDataset, LabeledDataset> generate(const LabelSplit& split,
                                                   const ShiftSpec& shift);

// Delimited text, header "id,domain,label,f0,...,f{D-1}", one sample per
// line, features printed with %.17g so a write -> read -> write cycle is
// byte-identical.
void write_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset read_dataset(const std::string& path);

}  // namespace uniadapt::data

#endif

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "regfuse/geometry.hpp"
#include "regfuse/rng.hpp"

namespace regfuse {

enum class ShapeKind {
    RandomBlob,  // asymmetric bumpy ellipsoid
    Plane,       // flat square patch
    Cylinder,    // open cylinder, rotationally symmetric
    Box,         // square-section box, axisymmetric
    Composite,   // blob with an attached box
};

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

struct PairSpec {
    ShapeKind shape = ShapeKind::RandomBlob;
    /// 0: rotation angle at most 45 degrees; 1: unrestricted (Haar-uniform).
    int rot_level = 0;
    double overlap_target = 0.7;
    double noise_sigma = 0.0;
    double noise_clip = 0.5;
    std::size_t points_per_cloud = 512;
    /// Translations are uniform in [-max_translation, max_translation]^3.
    double max_translation = 0.5;
    int category_id = 0;
    RngSeed seed{};
};

struct GeneratedPair {
    PointCloud src;
    PointCloud tgt;
    /// Maps the source frame onto the target frame.
    RigidTransform gt;
    /// Source points whose pre-noise counterpart is also in the target view.
    std::vector<bool> overlap_mask_src;
    int category_id = 0;

    double planted_overlap() const;
};

/// Thrown when no view pair reaches the requested overlap within the attempt
/// budget; carries the closest fraction found.
class OverlapUnreachable : public std::runtime_error {
public:
    OverlapUnreachable(const std::string& what, double best) : std::runtime_error(what), best_achieved(best) {}
    double best_achieved;
};

/// Samples `count` points on a complete shape of the given family. Shape
/// parameters are drawn from `rng`, so each call yields a different member
/// of the family. The result is centered on its centroid.
PointCloud sample_complete_shape(ShapeKind kind, std::size_t count, Rng& rng);

/// Cuts two partial views out of one complete shape. Each view keeps the
/// `points_per_cloud` points furthest along its view direction; the angle
/// between the two directions is bisected until the shared fraction is
/// within 0.05 of `overlap_target`. The source view is then moved by the
/// inverse ground truth and both views get independent clipped noise.
GeneratedPair generate_pair(const PairSpec& spec);

void validate(const PairSpec& spec);

/// Independent N(0, sigma²) per coordinate, each perturbation clamped to
/// [-clip, clip].
PointCloud add_noise(const PointCloud& cloud, double sigma, double clip, RngSeed seed);

/// Uniform subset of size n without replacement, original order kept.
PointCloud subsample(const PointCloud& cloud, std::size_t n, RngSeed seed);
std::vector<std::size_t> subsample_indices(std::size_t size, std::size_t n, RngSeed seed);

/// Density variation: both views drawn down to n points independently
/// (streams 101 and 102 of `seed`), the mask following the source.
GeneratedPair subsample_pair(const GeneratedPair& pair, std::size_t n, RngSeed seed);

}  // namespace regfuse

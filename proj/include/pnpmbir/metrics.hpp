#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pnpmbir/types.hpp"

namespace pnpmbir {

/// Intensity window [lo, hi] in the units of the image it is applied to.
struct Window {
  double lo = 0.0;
  double hi = 1.0;

  /// Display window from level/width, e.g. WL 30 / WW 300 -> [-120, 180].
  static Window from_level_width(double level, double width) {
    return {level - 0.5 * width, level + 0.5 * width};
  }
};

/// Default metric window in HU.
inline Window default_hu_window() { return Window::from_level_width(30.0, 300.0); }

inline constexpr int kGlcmLevels = 256;

/// Linear binning of clamped values into [0, levels - 1]; hi maps to levels - 1.
Array2i quantize_levels(const Array2d& img, Window window, int levels = kGlcmLevels);

/// Pixel offsets (drow, dcol) for the four GLCM angles 0, pi/4, pi/2, 3pi/4.
inline constexpr std::array<std::array<int, 2>, 4> kGlcmOffsets = {
    {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}};

/// Symmetric, normalized co-occurrence matrix for one offset (distance 1).
/// `angle_index` selects from kGlcmOffsets. Pairs falling outside the image are skipped.
Array2d glcm_matrix(const Array2i& qimg, int angle_index, int levels = kGlcmLevels);

struct GlcmFeatures {
  double contrast = 0.0;
  double entropy = 0.0;
  double energy = 0.0;
  double homogeneity = 0.0;
  double correlation = 0.0;
  double dissimilarity = 0.0;
  double asm_ = 0.0;  // angular second moment
};

/// Haralick features of one normalized co-occurrence matrix (natural-log entropy;
/// correlation is 1 when a marginal has zero variance).
GlcmFeatures glcm_features_of(const Array2d& p);

/// Features averaged over the four angles.
GlcmFeatures glcm_features(const Array2i& qimg, int levels = kGlcmLevels);

/// Normalized histogram of quantized levels.
Eigen::VectorXd level_histogram(const Array2i& qimg, int levels = kGlcmLevels);

/// 1-D Wasserstein-1 distance on a unit intensity axis with bin width 1/bins.
/// Histograms are renormalized to unit mass; negative mass is an InputError.
double emd(const Eigen::VectorXd& hist_a, const Eigen::VectorXd& hist_b);

/// Relative changes against a baseline. Contrast, dissimilarity and entropy are
/// sign-flipped so that reductions read as positive improvements.
enum class Feature { Contrast, Energy, Homogeneity, Correlation, Dissimilarity, Asm, Entropy };
inline constexpr std::array<Feature, 7> kReportFeatures = {
    Feature::Contrast, Feature::Energy,        Feature::Homogeneity, Feature::Correlation,
    Feature::Dissimilarity, Feature::Asm, Feature::Entropy};

std::string feature_name(Feature f);
double feature_value(const GlcmFeatures& g, Feature f);
bool lower_is_better(Feature f);

/// Improvement in percent, or nullopt for a zero baseline.
std::optional<double> percent_change(Feature f, double method, double baseline);

struct MethodMetrics {
  GlcmFeatures glcm;
  double emd = 0.0;
};

struct ReportRow {
  std::string method;
  MethodMetrics metrics;
  std::array<std::optional<double>, 7> pct_change;
};

std::vector<ReportRow> relative_change_report(const std::map<std::string, MethodMetrics>& methods,
                                              const GlcmFeatures& baseline);

/// CSV: method, contrast, energy, homogeneity, correlation, dissimilarity, asm,
/// entropy, emd, then <feature>_pct_change for the seven features.
std::string report_csv(const std::vector<ReportRow>& rows);
/// Aligned text table with a note on the sign convention.
std::string report_table(const std::vector<ReportRow>& rows);

}  // namespace pnpmbir

#include "pnpmbir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace pnpmbir {

Array2i quantize_levels(const Array2d& img, Window window, int levels) {
  if (!(window.lo < window.hi)) throw UsageError("quantization window needs lo < hi");
  if (levels < 2) throw UsageError("need at least 2 gray levels");
  if (!img.isFinite().all()) throw InputError("cannot quantize non-finite values");
  const double width = window.hi - window.lo;
  Array2i q(img.rows(), img.cols());
  for (Index i = 0; i < img.size(); ++i) {
    const double t = (img.data()[i] - window.lo) / width;
    const double bin = std::floor(t * levels);
    q.data()[i] = int(std::clamp(bin, 0.0, double(levels - 1)));
  }
  return q;
}

Array2d glcm_matrix(const Array2i& qimg, int angle_index, int levels) {
  if (angle_index < 0 || angle_index >= int(kGlcmOffsets.size())) {
    throw UsageError("glcm angle index must be in [0, 4)");
  }
  if (qimg.size() > 0 && (qimg.minCoeff() < 0 || qimg.maxCoeff() >= levels)) {
    throw InputError("quantized image has levels outside [0, " + std::to_string(levels) + ")");
  }
  const int dr = kGlcmOffsets[angle_index][0];
  const int dc = kGlcmOffsets[angle_index][1];
  Array2d p = Array2d::Zero(levels, levels);
  double total = 0.0;
  for (Index r = 0; r < qimg.rows(); ++r) {
    const Index r2 = r + dr;
    if (r2 < 0 || r2 >= qimg.rows()) continue;
    for (Index c = 0; c < qimg.cols(); ++c) {
      const Index c2 = c + dc;
      if (c2 < 0 || c2 >= qimg.cols()) continue;
      const int a = qimg(r, c);
      const int b = qimg(r2, c2);
      p(a, b) += 1.0;
      p(b, a) += 1.0;
      total += 2.0;
    }
  }
  if (total == 0.0) throw InputError("image too small for a co-occurrence pair at this angle");
  return p / total;
}

GlcmFeatures glcm_features_of(const Array2d& p) {
  const Index levels = p.rows();
  GlcmFeatures f;
  double mu_i = 0.0;
  double mu_j = 0.0;
  for (Index i = 0; i < levels; ++i) {
    for (Index j = 0; j < levels; ++j) {
      const double pij = p(i, j);
      if (pij == 0.0) continue;
      const double d = double(i - j);
      f.contrast += pij * d * d;
      f.dissimilarity += pij * std::abs(d);
      f.homogeneity += pij / (1.0 + d * d);
      f.asm_ += pij * pij;
      f.entropy -= pij * std::log(pij);
      mu_i += pij * double(i);
      mu_j += pij * double(j);
    }
  }
  double var_i = 0.0;
  double var_j = 0.0;
  double cov = 0.0;
  for (Index i = 0; i < levels; ++i) {
    for (Index j = 0; j < levels; ++j) {
      const double pij = p(i, j);
      if (pij == 0.0) continue;
      var_i += pij * (double(i) - mu_i) * (double(i) - mu_i);
      var_j += pij * (double(j) - mu_j) * (double(j) - mu_j);
      cov += pij * (double(i) - mu_i) * (double(j) - mu_j);
    }
  }
  f.correlation = (var_i < 1e-15 || var_j < 1e-15) ? 1.0 : cov / std::sqrt(var_i * var_j);
  f.energy = std::sqrt(f.asm_);
  return f;
}

GlcmFeatures glcm_features(const Array2i& qimg, int levels) {
  GlcmFeatures mean;
  constexpr int n_angles = int(kGlcmOffsets.size());
  for (int a = 0; a < n_angles; ++a) {
    const GlcmFeatures f = glcm_features_of(glcm_matrix(qimg, a, levels));
    mean.contrast += f.contrast / n_angles;
    mean.entropy += f.entropy / n_angles;
    mean.homogeneity += f.homogeneity / n_angles;
    mean.correlation += f.correlation / n_angles;
    mean.dissimilarity += f.dissimilarity / n_angles;
    mean.asm_ += f.asm_ / n_angles;
  }
  // energy is defined through the averaged ASM so that energy^2 == ASM holds.
  mean.energy = std::sqrt(mean.asm_);
  return mean;
}

Eigen::VectorXd level_histogram(const Array2i& qimg, int levels) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(levels);
  for (Index i = 0; i < qimg.size(); ++i) {
    const int q = qimg.data()[i];
    if (q < 0 || q >= levels) throw InputError("level outside histogram range");
    h[q] += 1.0;
  }
  if (qimg.size() > 0) h /= double(qimg.size());
  return h;
}

double emd(const Eigen::VectorXd& hist_a, const Eigen::VectorXd& hist_b) {
  if (hist_a.size() != hist_b.size() || hist_a.size() == 0) {
    throw DimensionError("emd needs two non-empty histograms of equal length");
  }
  if ((hist_a.array() < 0.0).any() || (hist_b.array() < 0.0).any()) {
    throw InputError("histogram has negative bin mass");
  }
  const double sa = hist_a.sum();
  const double sb = hist_b.sum();
  if (!(sa > 0.0) || !(sb > 0.0)) throw InputError("histogram has zero total mass");
  const bool a_unit = std::abs(sa - 1.0) <= 1e-9;
  const bool b_unit = std::abs(sb - 1.0) <= 1e-9;
  const Index n = hist_a.size();
  double cdf_a = 0.0;
  double cdf_b = 0.0;
  double acc = 0.0;
  for (Index k = 0; k < n; ++k) {
    cdf_a += a_unit ? hist_a[k] : hist_a[k] / sa;
    cdf_b += b_unit ? hist_b[k] : hist_b[k] / sb;
    acc += std::abs(cdf_a - cdf_b);
  }
  return acc / double(n);
}

std::string feature_name(Feature f) {
  switch (f) {
    case Feature::Contrast: return "contrast";
    case Feature::Energy: return "energy";
    case Feature::Homogeneity: return "homogeneity";
    case Feature::Correlation: return "correlation";
    case Feature::Dissimilarity: return "dissimilarity";
    case Feature::Asm: return "asm";
    case Feature::Entropy: return "entropy";
  }
  return "unknown";
}

double feature_value(const GlcmFeatures& g, Feature f) {
  switch (f) {
    case Feature::Contrast: return g.contrast;
    case Feature::Energy: return g.energy;
    case Feature::Homogeneity: return g.homogeneity;
    case Feature::Correlation: return g.correlation;
    case Feature::Dissimilarity: return g.dissimilarity;
    case Feature::Asm: return g.asm_;
    case Feature::Entropy: return g.entropy;
  }
  return 0.0;
}

bool lower_is_better(Feature f) {
  return f == Feature::Contrast || f == Feature::Dissimilarity || f == Feature::Entropy;
}

std::optional<double> percent_change(Feature f, double method, double baseline) {
  if (baseline == 0.0) return std::nullopt;
  const double raw = 100.0 * (method - baseline) / std::abs(baseline);
  // + 0.0 keeps an exact tie from printing as -0.
  return (lower_is_better(f) ? -raw : raw) + 0.0;
}

std::vector<ReportRow> relative_change_report(const std::map<std::string, MethodMetrics>& methods,
                                              const GlcmFeatures& baseline) {
  std::vector<ReportRow> rows;
  for (const auto& [name, m] : methods) {
    ReportRow row{name, m, {}};
    for (std::size_t k = 0; k < kReportFeatures.size(); ++k) {
      const Feature f = kReportFeatures[k];
      row.pct_change[k] = percent_change(f, feature_value(m.glcm, f), feature_value(baseline, f));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "method";
  for (Feature f : kReportFeatures) out << ',' << feature_name(f);
  out << ",emd";
  for (Feature f : kReportFeatures) out << ',' << feature_name(f) << "_pct_change";
  out << '\n' << std::setprecision(12);
  for (const auto& row : rows) {
    out << row.method;
    for (Feature f : kReportFeatures) out << ',' << feature_value(row.metrics.glcm, f);
    out << ',' << row.metrics.emd;
    for (const auto& pct : row.pct_change) {
      out << ',';
      if (pct) {
        out << *pct;
      } else {
        out << "undefined";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string report_table(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "method";
  for (Feature f : kReportFeatures) out << std::right << std::setw(15) << feature_name(f);
  out << std::setw(12) << "emd" << '\n';
  for (const auto& row : rows) {
    out << std::left << std::setw(14) << row.method << std::right;
    for (Feature f : kReportFeatures) {
      out << std::setw(15) << std::setprecision(6) << feature_value(row.metrics.glcm, f);
    }
    out << std::setw(12) << std::setprecision(5) << row.metrics.emd << '\n';
    out << std::left << std::setw(14) << "  change %" << std::right;
    for (const auto& pct : row.pct_change) {
      std::ostringstream cell;
      if (pct) {
        cell << std::showpos << std::fixed << std::setprecision(1) << *pct;
      } else {
        cell << "undefined";
      }
      out << std::setw(15) << cell.str();
    }
    out << '\n';
  }
  out << "\nchange % = 100 (f - f_baseline) / |f_baseline|, negated for contrast,\n"
         "dissimilarity and entropy so that reductions read as improvements.\n";
  return out.str();
}

}  // namespace pnpmbir

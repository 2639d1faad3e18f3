#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "depthlab/data.hpp"
#include "depthlab/model.hpp"

namespace depthlab::eval {

struct EvalProtocol {
  double depth_cap = 80.0;
  double depth_floor = 1e-3;
  enum class Crop { NONE, GARG_CENTRE } crop = Crop::NONE;
  bool use_flip_merge = true;
};

struct PerImageMetrics {
  std::string id;
  double ard = 0, srd = 0, rmse = 0, log_rmse = 0, d1 = 0, d2 = 0, d3 = 0;
  bool valid = true;  // false when no valid gt pixel fell inside the crop
};

struct MetricReport {
  double ard = 0, srd = 0, rmse = 0, log_rmse = 0, d1 = 0, d2 = 0, d3 = 0;
  int64_t n_images = 0;
  int64_t n_skipped = 0;
  std::vector<PerImageMetrics> per_image;
};

/// Metrics over valid pixels (gt > 0, inside the crop) with pred clamped to
/// [floor, cap]. Returns valid=false when no pixel qualifies.
PerImageMetrics compute_metrics(const Tensor& pred_depth, const Tensor& gt_depth,
                                const EvalProtocol& protocol);

/// The community-standard centre crop bounds {r0, r1, c0, c1} for an HxW
/// raster (rows [0.40810811 H, 0.99189189 H), cols [0.03594771 W, 0.96405229 W)).
std::array<int64_t, 4> garg_crop(int64_t h, int64_t w);

/// Predicts the finest-scale left disparity [H,W] for a sample; `flipped`
/// asks for the prediction of the horizontally mirrored input (used to form
/// the flip-merged map). Implementations: trained generator, ground-truth
/// oracle, constant map.
using DisparityFn = std::function<Tensor(const data::StereoSample& sample, bool flipped)>;

DisparityFn generator_predictor(model::Generator& gen);
DisparityFn oracle_predictor();                 // derives disparity from gt_depth
DisparityFn constant_predictor(double value);

/// Full test-time pipeline: predict (optionally flip-merged), upsample to the
/// gt resolution, convert to depth, clamp, score, aggregate by unweighted
/// mean over images. Samples without gt or without valid pixels are skipped
/// with a warning count.
MetricReport evaluate_predictor(const DisparityFn& fn, const data::Dataset& dataset,
                                data::Split split, const EvalProtocol& protocol);

MetricReport evaluate_model(model::Generator& gen, const data::Dataset& dataset, data::Split split,
                            const EvalProtocol& protocol);

/// L1 / L2 / mean-SSIM scores of a reconstruction (image quality, not loss).
struct ImageQuality {
  double l1 = 0, l2 = 0, ssim = 0;
};
ImageQuality image_quality(const Tensor& recon, const Tensor& target);

/// Mean reconstruction quality of warped right images over a split, plus the
/// identity-mapping row (left vs right directly).
ImageQuality identity_image_quality(const data::Dataset& dataset, data::Split split);
ImageQuality model_image_quality(model::Generator& gen, const data::Dataset& dataset,
                                 data::Split split);

/// Paired per-image metric records for scatter analysis.
struct ScatterPoint {
  std::string id;
  double metric_a = 0, metric_b = 0;
};
std::vector<ScatterPoint> pairwise_scatter(const MetricReport& report_a,
                                           const MetricReport& report_b,
                                           const std::string& metric = "ard");

// ---- report files ----
void write_aggregate_csv(const std::string& path,
                         const std::vector<std::pair<std::string, MetricReport>>& rows);
void write_per_image_jsonl(const std::string& path, const MetricReport& report);
MetricReport read_per_image_jsonl(const std::string& path);
void write_scatter_csv(const std::string& path, const std::vector<ScatterPoint>& points);

double metric_value(const PerImageMetrics& m, const std::string& name);
double metric_value(const MetricReport& r, const std::string& name);

}  // namespace depthlab::eval

#include "depthlab/eval.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "depthlab/image_io.hpp"
#include "depthlab/losses.hpp"

namespace depthlab::eval {

using json = nlohmann::json;

std::array<int64_t, 4> garg_crop(int64_t h, int64_t w) {
  auto r0 = static_cast<int64_t>(0.40810811 * static_cast<double>(h));
  auto r1 = static_cast<int64_t>(0.99189189 * static_cast<double>(h));
  auto c0 = static_cast<int64_t>(0.03594771 * static_cast<double>(w));
  auto c1 = static_cast<int64_t>(0.96405229 * static_cast<double>(w));
  return {r0, r1, c0, c1};
}

PerImageMetrics compute_metrics(const Tensor& pred_depth, const Tensor& gt_depth,
                                const EvalProtocol& protocol) {
  check(pred_depth.same_shape(gt_depth) && pred_depth.rank() == 2,
        "compute_metrics: rasters must be aligned [H,W]");
  int64_t h = pred_depth.dim(0), w = pred_depth.dim(1);
  int64_t r0 = 0, r1 = h, c0 = 0, c1 = w;
  if (protocol.crop == EvalProtocol::Crop::GARG_CENTRE) {
    auto box = garg_crop(h, w);
    r0 = box[0];
    r1 = box[1];
    c0 = box[2];
    c1 = box[3];
  }

  PerImageMetrics m;
  int64_t n = 0;
  double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  double sum_ard = 0, sum_srd = 0, sum_sq = 0, sum_logsq = 0;
  int64_t n_d1 = 0, n_d2 = 0, n_d3 = 0;
  for (int64_t i = r0; i < r1; ++i)
    for (int64_t j = c0; j < c1; ++j) {
      double g = gt_depth.at(i, j);
      if (g <= 0.0) continue;
      double p = std::min(protocol.depth_cap, std::max(protocol.depth_floor, pred_depth.at(i, j)));
      ++n;
      double diff = p - g;
      sum_ard += std::fabs(diff) / g;
      sum_srd += diff * diff / g;
      sum_sq += diff * diff;
      double ld = std::log(p) - std::log(g);
      sum_logsq += ld * ld;
      double ratio = std::max(p / g, g / p);
      if (ratio < t1) ++n_d1;
      if (ratio < t2) ++n_d2;
      if (ratio < t3) ++n_d3;
    }
  if (n == 0) {
    m.valid = false;
    return m;
  }
  double dn = static_cast<double>(n);
  m.ard = sum_ard / dn;
  m.srd = sum_srd / dn;
  m.rmse = std::sqrt(sum_sq / dn);
  m.log_rmse = std::sqrt(sum_logsq / dn);
  m.d1 = static_cast<double>(n_d1) / dn;
  m.d2 = static_cast<double>(n_d2) / dn;
  m.d3 = static_cast<double>(n_d3) / dn;
  return m;
}

DisparityFn generator_predictor(model::Generator& gen) {
  return [&gen](const data::StereoSample& sample, bool flipped) {
    NoRecordGuard norec;
    Tensor img = sample.left;
    if (flipped) {
      Tensor f(img.shape());
      int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < w; ++j) f.at(ch, i, j) = img.at(ch, i, w - 1 - j);
      img = std::move(f);
    }
    auto pyr = gen.forward(Var::leaf(std::move(img)), /*training=*/false);
    const Tensor& d = pyr.left[0].val();  // [1,H,W]
    return d.reshaped({d.dim(1), d.dim(2)});
  };
}

DisparityFn oracle_predictor() {
  return [](const data::StereoSample& sample, bool flipped) {
    check(!sample.gt_depth.empty(), "oracle_predictor: sample has no gt_depth");
    Tensor disp = geometry::depth_to_disparity(sample.gt_depth, sample.rig);
    if (disp.dim(0) != sample.left.dim(1) || disp.dim(1) != sample.left.dim(2))
      disp = io::resize_bilinear(disp, sample.left.dim(1), sample.left.dim(2));
    if (flipped) {
      Tensor f(disp.shape());
      int64_t h = disp.dim(0), w = disp.dim(1);
      for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) f.at(i, j) = disp.at(i, w - 1 - j);
      disp = std::move(f);
    }
    return disp;
  };
}

DisparityFn constant_predictor(double value) {
  return [value](const data::StereoSample& sample, bool) {
    return Tensor({sample.left.dim(1), sample.left.dim(2)}, value);
  };
}

namespace {
Tensor flip_back(const Tensor& d) {
  Tensor out(d.shape());
  int64_t h = d.dim(0), w = d.dim(1);
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < w; ++j) out.at(i, j) = d.at(i, w - 1 - j);
  return out;
}
}  // namespace

MetricReport evaluate_predictor(const DisparityFn& fn, const data::Dataset& dataset,
                                data::Split split, const EvalProtocol& protocol) {
  MetricReport report;
  double sums[7] = {0, 0, 0, 0, 0, 0, 0};
  int64_t n = dataset.size(split);
  for (int64_t idx = 0; idx < n; ++idx) {
    data::StereoSample sample = dataset.get(split, idx, /*with_gt=*/true);
    if (sample.gt_depth.empty()) {
      ++report.n_skipped;
      std::cerr << "eval: sample " << sample.id << " has no ground truth; skipped\n";
      continue;
    }
    Tensor d = fn(sample, false);
    if (protocol.use_flip_merge) {
      Tensor df = flip_back(fn(sample, true));
      d = geometry::flip_merge(d, df);
    }
    if (d.dim(0) != sample.gt_depth.dim(0) || d.dim(1) != sample.gt_depth.dim(1))
      d = io::resize_bilinear(d, sample.gt_depth.dim(0), sample.gt_depth.dim(1));
    Tensor pred = geometry::disparity_to_depth(d, sample.rig);
    PerImageMetrics m = compute_metrics(pred, sample.gt_depth, protocol);
    m.id = sample.id;
    report.per_image.push_back(m);
    if (!m.valid) {
      ++report.n_skipped;
      std::cerr << "eval: sample " << sample.id << " has no valid pixel inside the crop\n";
      continue;
    }
    ++report.n_images;
    sums[0] += m.ard;
    sums[1] += m.srd;
    sums[2] += m.rmse;
    sums[3] += m.log_rmse;
    sums[4] += m.d1;
    sums[5] += m.d2;
    sums[6] += m.d3;
  }
  if (report.n_images > 0) {
    double dn = static_cast<double>(report.n_images);
    report.ard = sums[0] / dn;
    report.srd = sums[1] / dn;
    report.rmse = sums[2] / dn;
    report.log_rmse = sums[3] / dn;
    report.d1 = sums[4] / dn;
    report.d2 = sums[5] / dn;
    report.d3 = sums[6] / dn;
  }
  return report;
}

MetricReport evaluate_model(model::Generator& gen, const data::Dataset& dataset, data::Split split,
                            const EvalProtocol& protocol) {
  return evaluate_predictor(generator_predictor(gen), dataset, split, protocol);
}

ImageQuality image_quality(const Tensor& recon, const Tensor& target) {
  check(recon.same_shape(target), "image_quality: dimension mismatch");
  ImageQuality q;
  double n = static_cast<double>(recon.size());
  for (int64_t i = 0; i < recon.size(); ++i) {
    double d = recon[i] - target[i];
    q.l1 += std::fabs(d) / n;
    q.l2 += d * d / n;
  }
  NoRecordGuard norec;
  // ssim_loss = mean (1 - SSIM)/2  =>  mean SSIM = 1 - 2 * loss
  double loss = losses::ssim_loss(Var::leaf(recon), Var::leaf(target)).item();
  q.ssim = 1.0 - 2.0 * loss;
  return q;
}

namespace {
ImageQuality mean_quality(const data::Dataset& dataset, data::Split split,
                          const std::function<Tensor(const data::StereoSample&)>& recon_of) {
  ImageQuality total;
  int64_t n = dataset.size(split);
  check(n > 0, "image_quality: empty split");
  for (int64_t i = 0; i < n; ++i) {
    data::StereoSample s = dataset.get(split, i, false);
    ImageQuality q = image_quality(recon_of(s), s.right);
    total.l1 += q.l1;
    total.l2 += q.l2;
    total.ssim += q.ssim;
  }
  total.l1 /= static_cast<double>(n);
  total.l2 /= static_cast<double>(n);
  total.ssim /= static_cast<double>(n);
  return total;
}
}  // namespace

ImageQuality identity_image_quality(const data::Dataset& dataset, data::Split split) {
  return mean_quality(dataset, split, [](const data::StereoSample& s) { return s.left; });
}

ImageQuality model_image_quality(model::Generator& gen, const data::Dataset& dataset,
                                 data::Split split) {
  return mean_quality(dataset, split, [&gen](const data::StereoSample& s) {
    NoRecordGuard norec;
    auto pyr = gen.forward(Var::leaf(s.left), false);
    const Tensor& dr = pyr.right[0].val();
    Tensor disp = dr.reshaped({dr.dim(1), dr.dim(2)});
    return geometry::warp(s.left, disp, +1);
  });
}

std::vector<ScatterPoint> pairwise_scatter(const MetricReport& report_a,
                                           const MetricReport& report_b,
                                           const std::string& metric) {
  check(report_a.per_image.size() == report_b.per_image.size(),
        "pairwise_scatter: reports cover different test sets");
  std::vector<ScatterPoint> points;
  for (size_t i = 0; i < report_a.per_image.size(); ++i) {
    const auto& a = report_a.per_image[i];
    const auto& b = report_b.per_image[i];
    check(a.id == b.id, "pairwise_scatter: id mismatch '" + a.id + "' vs '" + b.id + "'");
    if (!a.valid || !b.valid) continue;
    points.push_back({a.id, metric_value(a, metric), metric_value(b, metric)});
  }
  return points;
}

double metric_value(const PerImageMetrics& m, const std::string& name) {
  if (name == "ard") return m.ard;
  if (name == "srd") return m.srd;
  if (name == "rmse") return m.rmse;
  if (name == "log_rmse") return m.log_rmse;
  if (name == "d1") return m.d1;
  if (name == "d2") return m.d2;
  if (name == "d3") return m.d3;
  throw std::invalid_argument("unknown metric: " + name);
}

double metric_value(const MetricReport& r, const std::string& name) {
  if (name == "ard") return r.ard;
  if (name == "srd") return r.srd;
  if (name == "rmse") return r.rmse;
  if (name == "log_rmse") return r.log_rmse;
  if (name == "d1") return r.d1;
  if (name == "d2") return r.d2;
  if (name == "d3") return r.d3;
  throw std::invalid_argument("unknown metric: " + name);
}

void write_aggregate_csv(const std::string& path,
                         const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::ofstream out(path);
  check(static_cast<bool>(out), "cannot write " + path);
  out << "experiment,ard,srd,rmse,log_rmse,d1,d2,d3,n\n";
  out.precision(10);
  for (const auto& [name, r] : rows)
    out << name << ',' << r.ard << ',' << r.srd << ',' << r.rmse << ',' << r.log_rmse << ','
        << r.d1 << ',' << r.d2 << ',' << r.d3 << ',' << r.n_images << '\n';
}

void write_per_image_jsonl(const std::string& path, const MetricReport& report) {
  std::ofstream out(path);
  check(static_cast<bool>(out), "cannot write " + path);
  for (const auto& m : report.per_image) {
    json j{{"id", m.id},  {"ard", m.ard},           {"srd", m.srd}, {"rmse", m.rmse},
           {"log_rmse", m.log_rmse}, {"d1", m.d1},  {"d2", m.d2},   {"d3", m.d3}};
    if (!m.valid) j["valid"] = false;
    out << j.dump() << '\n';
  }
}

MetricReport read_per_image_jsonl(const std::string& path) {
  std::ifstream in(path);
  check(static_cast<bool>(in), "cannot read " + path);
  MetricReport r;
  std::string line;
  double sums[7] = {0};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    PerImageMetrics m;
    m.id = j.at("id").get<std::string>();
    m.ard = j.at("ard").get<double>();
    m.srd = j.at("srd").get<double>();
    m.rmse = j.at("rmse").get<double>();
    m.log_rmse = j.at("log_rmse").get<double>();
    m.d1 = j.at("d1").get<double>();
    m.d2 = j.at("d2").get<double>();
    m.d3 = j.at("d3").get<double>();
    m.valid = !j.contains("valid") || j.at("valid").get<bool>();
    r.per_image.push_back(m);
    if (m.valid) {
      ++r.n_images;
      sums[0] += m.ard;
      sums[1] += m.srd;
      sums[2] += m.rmse;
      sums[3] += m.log_rmse;
      sums[4] += m.d1;
      sums[5] += m.d2;
      sums[6] += m.d3;
    }
  }
  if (r.n_images) {
    double dn = static_cast<double>(r.n_images);
    r.ard = sums[0] / dn;
    r.srd = sums[1] / dn;
    r.rmse = sums[2] / dn;
    r.log_rmse = sums[3] / dn;
    r.d1 = sums[4] / dn;
    r.d2 = sums[5] / dn;
    r.d3 = sums[6] / dn;
  }
  return r;
}

void write_scatter_csv(const std::string& path, const std::vector<ScatterPoint>& points) {
  std::ofstream out(path);
  check(static_cast<bool>(out), "cannot write " + path);
  out << "id,metric_a,metric_b\n";
  out.precision(10);
  for (const auto& p : points) out << p.id << ',' << p.metric_a << ',' << p.metric_b << '\n';
}

}  // namespace depthlab::eval

#include "depthlab/engine.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace depthlab::engine {

namespace fs = std::filesystem;

losses::ScaleOutputs build_scale_outputs(const Var& left, const Var& right,
                                         const model::DisparityPyramid& pyramid) {
  losses::ScaleOutputs so;
  Var tl = left, tr = right;
  for (int64_t s = 0; s < pyramid.scales(); ++s) {
    if (s > 0) {
      NoRecordGuard norec;
      tl = ops::avg_pool2(tl);
      tr = ops::avg_pool2(tr);
    }
    so.target_left.push_back(tl);
    so.target_right.push_back(tr);
    so.disp_left.push_back(pyramid.left[s]);
    so.disp_right.push_back(pyramid.right[s]);
    so.recon_right.push_back(ops::warp(tl, pyramid.right[s], +1));
    so.recon_left.push_back(ops::warp(tr, pyramid.left[s], -1));
  }
  return so;
}

namespace {

struct Batch {
  Tensor left, right;  // [B,3,H,W]
  std::vector<std::string> ids;
};

Batch assemble_batch(const data::Dataset& dataset, data::Split split,
                     const std::vector<int64_t>& indices, size_t begin, size_t end, bool augment,
                     uint64_t seed, int64_t epoch) {
  Batch b;
  int64_t n = static_cast<int64_t>(end - begin);
  for (size_t k = begin; k < end; ++k) {
    int64_t idx = indices[k];
    data::StereoSample s = dataset.get(split, idx, /*with_gt=*/false);
    if (augment) s = data::apply_augment(s, data::sample_augment_params(data::augment_seed(seed, epoch, idx)));
    if (b.left.empty()) {
      b.left = Tensor({n, 3, s.left.dim(1), s.left.dim(2)});
      b.right = Tensor({n, 3, s.right.dim(1), s.right.dim(2)});
    }
    check(s.left.dim(1) == b.left.dim(2) && s.left.dim(2) == b.left.dim(3),
          "train: inconsistent image sizes in batch (sample " + s.id + ")");
    int64_t off = static_cast<int64_t>(k - begin) * s.left.size();
    std::copy(s.left.data(), s.left.data() + s.left.size(), b.left.data() + off);
    std::copy(s.right.data(), s.right.data() + s.right.size(), b.right.data() + off);
    b.ids.push_back(s.id);
  }
  return b;
}

struct ValResult {
  double total = 0, l1 = 0;
};

ValResult validate(model::Generator& gen, const data::Dataset& dataset,
                   const losses::LossWeights& weights, int batch_size) {
  NoRecordGuard norec;
  ValResult acc;
  int64_t n = dataset.size(data::Split::VAL);
  check(n > 0, "train: validation split is empty");
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  int64_t batches = 0;
  for (size_t at = 0; at < order.size(); at += static_cast<size_t>(batch_size)) {
    size_t end = std::min(order.size(), at + static_cast<size_t>(batch_size));
    Batch b = assemble_batch(dataset, data::Split::VAL, order, at, end, /*augment=*/false, 0, 0);
    Var left = Var::leaf(std::move(b.left));
    Var right = Var::leaf(std::move(b.right));
    auto pyr = gen.forward(left, /*training=*/false);
    auto so = build_scale_outputs(left, right, pyr);
    losses::LossBreakdown bd;
    acc.total += losses::reconstruction_loss(so, weights, &bd).item();
    acc.l1 += 0.5 * (losses::l1_loss(so.recon_left[0], so.target_left[0]).item() +
                     losses::l1_loss(so.recon_right[0], so.target_right[0]).item());
    ++batches;
  }
  acc.total /= static_cast<double>(batches);
  acc.l1 /= static_cast<double>(batches);
  return acc;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) {
    if (!s.empty()) s += ",";
    s += id;
  }
  return s;
}

}  // namespace

RunRecord train(const TrainConfig& config, const data::Dataset& dataset,
                const TrainOptions& opts) {
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();

  check(config.epochs >= 1 && config.batch_size >= 1, "train: bad epochs/batch_size");
  check(config.weights.any_component() || config.gan.kind != adversarial::GanKind::NONE,
        "train: no loss components enabled and no adversarial objective");

  RunRecord record;
  record.config_hash = config.config_hash;
  record.seed = config.seed;

  // Independent streams: generator init, discriminator init and gradient
  // penalty draws never perturb data order or each other.
  model::Generator gen(config.generator, derive_seed(config.seed, "gen-init"));
  nn::Adam opt_g(gen.params(), config.lr);

  std::unique_ptr<adversarial::Discriminator> disc;
  nn::Adam opt_d;
  Rng gp_rng(derive_seed(config.seed, "gp"));
  data::StereoSample probe = dataset.get(data::Split::TRAIN, 0, false);
  if (config.gan.kind != adversarial::GanKind::NONE) {
    disc = adversarial::build_discriminator(
        config.gan, {probe.left.dim(0), probe.left.dim(1), probe.left.dim(2)},
        derive_seed(config.seed, "disc-init"));
    opt_d = nn::Adam(disc->params(), config.lr);
  }

  std::ofstream log;
  std::string ckpt_dir;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    ckpt_dir = opts.out_dir + "/checkpoints";
    fs::create_directories(ckpt_dir);
    log.open(opts.out_dir + "/run_log.jsonl");
    check(static_cast<bool>(log), "train: cannot open run log in " + opts.out_dir);
  }

  auto emit_step = [&](const std::string& line) {
    if (log.is_open()) log << line << '\n';
    if (opts.step_sink) opts.step_sink(line);
  };

  nn::PlateauScheduler scheduler(config.scheduler.factor, config.scheduler.patience);
  double lr = config.lr;

  {  // epoch 0: pre-training validation
    ValResult v = validate(gen, dataset, config.weights, config.batch_size);
    EpochRecord e;
    e.epoch = 0;
    e.val_total = v.total;
    e.val_l1 = v.l1;
    e.lr = lr;
    record.epochs.push_back(e);
  }

  int64_t n_train = dataset.size(data::Split::TRAIN);
  check(n_train > 0, "train: training split is empty");
  int64_t steps_done = 0;
  bool stop = false;
  bool adversarial_g = config.gan.kind != adversarial::GanKind::NONE &&
                       config.weights.phi_g != 0.0;

  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    auto order = data::epoch_order(n_train, config.seed, epoch);
    EpochRecord e;
    e.epoch = epoch;
    e.lr = lr;

    for (size_t at = 0; at < order.size() && !stop; at += static_cast<size_t>(config.batch_size)) {
      size_t end = std::min(order.size(), at + static_cast<size_t>(config.batch_size));
      Batch batch = assemble_batch(dataset, data::Split::TRAIN, order, at, end, opts.augment,
                                   config.seed, epoch);
      Var left = Var::leaf(std::move(batch.left));
      Var right = Var::leaf(std::move(batch.right));

      auto pyr = gen.forward(left, /*training=*/true);
      auto so = build_scale_outputs(left, right, pyr);

      double d_value = 0;
      if (disc) {
        Var fake = so.recon_right[0].detach();
        for (int k = 0; k < config.gan.n_critic; ++k) {
          opt_d.zero_grad();
          Var dl = adversarial::d_loss(config.gan, *disc, right, fake, gp_rng, true);
          d_value = dl.item();
          if (!std::isfinite(d_value))
            throw TrainingError("non-finite discriminator loss at epoch " +
                                std::to_string(epoch) + " step " + std::to_string(steps_done) +
                                " batch [" + join_ids(batch.ids) + "]");
          backward(dl);
          opt_d.step();
          ++record.discriminator_steps;
        }
      }

      losses::LossBreakdown bd;
      Var total = losses::reconstruction_loss(so, config.weights, &bd);
      double g_adv_value = 0;
      if (disc) {
        if (adversarial_g) {
          Var g_adv = adversarial::g_loss(config.gan, *disc, so.recon_right[0], true);
          g_adv_value = g_adv.item();
          total = total + ops::scale(g_adv, config.weights.phi_g);
        } else {
          NoRecordGuard norec;
          g_adv_value = adversarial::g_loss(config.gan, *disc, so.recon_right[0].detach(), true).item();
        }
      }

      double total_value = total.item();
      if (!std::isfinite(total_value)) {
        std::ostringstream os;
        os << "non-finite generator loss at epoch " << epoch << " step " << steps_done
           << " batch [" << join_ids(batch.ids) << "]: l1=" << bd.l1 << " ssim=" << bd.ssim
           << " lr=" << bd.lr << " disp=" << bd.disp << " g_adv=" << g_adv_value;
        throw TrainingError(os.str());
      }

      opt_g.zero_grad();
      backward(total);
      opt_g.step();
      ++record.generator_steps;
      ++steps_done;

      e.train_total += total_value;
      e.train_l1 += bd.l1;
      e.train_ssim += bd.ssim;
      e.train_lr += bd.lr;
      e.train_disp += bd.disp;
      e.train_g_adv += g_adv_value;
      e.train_d_loss += d_value;
      ++e.steps;

      {
        std::ostringstream os;
        os.precision(10);
        os << "{\"epoch\":" << epoch << ",\"step\":" << steps_done << ",\"total\":" << total_value
           << ",\"l1\":" << bd.l1 << ",\"ssim\":" << bd.ssim << ",\"lr_consistency\":" << bd.lr
           << ",\"smoothness\":" << bd.disp << ",\"g_adv\":" << g_adv_value
           << ",\"d_loss\":" << d_value << ",\"lr\":" << lr << "}";
        emit_step(os.str());
      }

      if (config.max_steps > 0 && steps_done >= config.max_steps) stop = true;
    }

    if (e.steps > 0) {
      double dn = static_cast<double>(e.steps);
      e.train_total /= dn;
      e.train_l1 /= dn;
      e.train_ssim /= dn;
      e.train_lr /= dn;
      e.train_disp /= dn;
      e.train_g_adv /= dn;
      e.train_d_loss /= dn;
    }

    ValResult v = validate(gen, dataset, config.weights, config.batch_size);
    e.val_total = v.total;
    e.val_l1 = v.l1;
    record.epochs.push_back(e);

    lr = scheduler.update(v.total, lr);
    opt_g.set_lr(lr);
    if (disc) opt_d.set_lr(lr);

    if (!ckpt_dir.empty()) {
      std::string path = config.keep_all_checkpoints
                             ? ckpt_dir + "/epoch_" + std::to_string(epoch) + ".bin"
                             : ckpt_dir + "/last.bin";
      save_checkpoint(path, gen, &opt_g, epoch);
      record.checkpoint_path = path;
    }
  }

  record.wall_seconds =
      std::chrono::duration_cast<std::chrono::duration<double>>(clock::now() - t0).count();
  return record;
}

std::vector<RunRecord> train_restarts(const TrainConfig& config, const data::Dataset& dataset,
                                      const TrainOptions& opts) {
  check(config.restarts >= 1, "train_restarts: restarts must be >= 1");
  std::vector<RunRecord> records;
  for (int i = 0; i < config.restarts; ++i) {
    TrainConfig c = config;
    c.seed = config.seed + static_cast<uint64_t>(i) * static_cast<uint64_t>(config.seed_stride);
    TrainOptions o = opts;
    if (!opts.out_dir.empty())
      o.out_dir = opts.out_dir + "/restart_" + std::to_string(i);
    records.push_back(train(c, dataset, o));
  }
  return records;
}

std::map<std::string, RestartStat> report_restarts(
    const std::vector<eval::MetricReport>& reports) {
  check(reports.size() >= 2, "report_restarts: needs at least 2 records");
  static const char* names[] = {"ard", "srd", "rmse", "log_rmse", "d1", "d2", "d3"};
  std::map<std::string, RestartStat> out;
  for (const char* name : names) {
    RestartStat st;
    st.min = 1e300;
    st.max = -1e300;
    double sum = 0;
    for (const auto& r : reports) {
      double v = eval::metric_value(r, name);
      st.min = std::min(st.min, v);
      st.max = std::max(st.max, v);
      sum += v;
    }
    double n = static_cast<double>(reports.size());
    st.mean = sum / n;
    double ss = 0;
    for (const auto& r : reports) {
      double d = eval::metric_value(r, name) - st.mean;
      ss += d * d;
    }
    st.stddev = std::sqrt(ss / (n - 1.0));
    out[name] = st;
  }
  return out;
}

void write_restart_csv(const std::string& path,
                       const std::map<std::string, RestartStat>& stats) {
  std::ofstream out(path);
  check(static_cast<bool>(out), "cannot write " + path);
  out << "metric,min,max,mean,std\n";
  out.precision(10);
  for (const auto& [name, st] : stats)
    out << name << ',' << st.min << ',' << st.max << ',' << st.mean << ',' << st.stddev << '\n';
}

}  // namespace depthlab::engine

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "depthlab/config.hpp"
#include "depthlab/engine.hpp"
#include "depthlab/enums.hpp"
#include "depthlab/image_io.hpp"
#include "depthlab/plot.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace depthlab;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "out";
  int64_t seed = -1;
  bool deterministic = false;
};

config::ExperimentConfig load_cfg(const GlobalArgs& g, std::vector<std::string> extra = {}) {
  if (g.config_path.empty()) throw config::ConfigError("--config is required");
  std::vector<std::string> overrides = g.sets;
  if (g.seed >= 0) overrides.push_back("train.seed=" + std::to_string(g.seed));
  for (auto& e : extra) overrides.push_back(std::move(e));
  return config::load_config(g.config_path, overrides);
}

void write_manifest(const std::string& out_dir, const std::string& command, json artifacts,
                    const GlobalArgs& g, bool ok = true) {
  json m{{"command", command},
         {"deterministic", g.deterministic},
         {"ok", ok},
         {"artifacts", std::move(artifacts)}};
  std::ofstream f(out_dir + "/manifest.json");
  f << m.dump(2) << '\n';
}

json record_to_json(const engine::RunRecord& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_total", e.train_total},
                      {"train_l1", e.train_l1},
                      {"train_ssim", e.train_ssim},
                      {"train_lr", e.train_lr},
                      {"train_disp", e.train_disp},
                      {"train_g_adv", e.train_g_adv},
                      {"train_d_loss", e.train_d_loss},
                      {"val_total", e.val_total},
                      {"val_l1", e.val_l1},
                      {"lr", e.lr},
                      {"steps", e.steps}});
  return json{{"config_hash", r.config_hash},
              {"seed", r.seed},
              {"wall_seconds", r.wall_seconds},
              {"checkpoint", r.checkpoint_path},
              {"discriminator_steps", r.discriminator_steps},
              {"generator_steps", r.generator_steps},
              {"epochs", std::move(epochs)}};
}

std::vector<engine::RunRecord> run_training(const config::ExperimentConfig& cfg,
                                            const std::string& out_dir) {
  auto dataset = config::make_dataset(cfg.data);
  engine::TrainOptions opts;
  opts.out_dir = out_dir;
  opts.augment = cfg.data.augment;
  auto records = engine::train_restarts(cfg.train, *dataset, opts);
  for (size_t i = 0; i < records.size(); ++i) {
    std::string dir = records.size() == 1 && cfg.train.restarts == 1
                          ? out_dir + "/restart_0"
                          : out_dir + "/restart_" + std::to_string(i);
    fs::create_directories(dir);
    std::ofstream f(dir + "/run_record.json");
    f << record_to_json(records[i]).dump(2) << '\n';
  }
  return records;
}

eval::MetricReport mean_of(const std::vector<eval::MetricReport>& reports) {
  eval::MetricReport out = reports.front();
  if (reports.size() == 1) return out;
  double n = static_cast<double>(reports.size());
  out.ard = out.srd = out.rmse = out.log_rmse = out.d1 = out.d2 = out.d3 = 0;
  for (const auto& r : reports) {
    out.ard += r.ard / n;
    out.srd += r.srd / n;
    out.rmse += r.rmse / n;
    out.log_rmse += r.log_rmse / n;
    out.d1 += r.d1 / n;
    out.d2 += r.d2 / n;
    out.d3 += r.d3 / n;
  }
  return out;
}

int cmd_train(const GlobalArgs& g) {
  auto cfg = load_cfg(g);
  fs::create_directories(g.out_dir);
  {
    std::ofstream f(g.out_dir + "/config.json");
    f << config::dump_config(cfg) << '\n';
  }
  std::cout << "config: " << config::dump_config(cfg) << "\n";
  auto records = run_training(cfg, g.out_dir);
  json artifacts{{"config", g.out_dir + "/config.json"}};
  json recs = json::array();
  for (size_t i = 0; i < records.size(); ++i) {
    recs.push_back({{"seed", records[i].seed},
                    {"checkpoint", records[i].checkpoint_path},
                    {"run_record", g.out_dir + "/restart_" + std::to_string(i) + "/run_record.json"}});
    std::cout << "restart " << i << ": seed=" << records[i].seed
              << " checkpoint=" << records[i].checkpoint_path << "\n";
  }
  artifacts["restarts"] = recs;
  write_manifest(g.out_dir, "train", artifacts, g);
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  bool oracle = false;
  bool no_flip_merge = false;
  std::string crop;
  double cap = -1;
  bool image_quality = true;
  std::string experiment_name;
};

int cmd_eval(const GlobalArgs& g, const EvalArgs& a) {
  std::vector<std::string> extra;
  if (a.no_flip_merge) extra.push_back("eval.flip_merge=false");
  if (!a.crop.empty()) extra.push_back("eval.crop=" + a.crop);
  if (a.cap > 0) extra.push_back("eval.depth_cap=" + std::to_string(a.cap));
  auto cfg = load_cfg(g, extra);
  auto dataset = config::make_dataset(cfg.data);
  fs::create_directories(g.out_dir);

  std::string name = a.experiment_name;
  eval::MetricReport report;
  std::unique_ptr<model::Generator> gen;
  if (a.oracle) {
    if (name.empty()) name = "oracle";
    report = eval::evaluate_predictor(eval::oracle_predictor(), *dataset, data::Split::TEST,
                                      cfg.eval);
  } else {
    if (a.checkpoint.empty()) throw config::ConfigError("eval: --checkpoint or --oracle required");
    auto loaded = engine::load_checkpoint(a.checkpoint);
    uint64_t cfg_hash = engine::generator_config_hash(cfg.train.generator);
    if (cfg_hash != loaded.generator_hash)
      throw std::runtime_error(
          "eval: generator architecture in --config does not match the checkpoint (config hash " +
          std::to_string(cfg_hash) + ", checkpoint hash " + std::to_string(loaded.generator_hash) +
          "); pass the config the model was trained with");
    gen = std::move(loaded.generator);
    if (name.empty()) name = fs::path(a.checkpoint).stem().string();
    report = eval::evaluate_model(*gen, *dataset, data::Split::TEST, cfg.eval);
  }

  eval::write_aggregate_csv(g.out_dir + "/aggregate.csv", {{name, report}});
  eval::write_per_image_jsonl(g.out_dir + "/per_image.jsonl", report);
  json artifacts{{"aggregate", g.out_dir + "/aggregate.csv"},
                 {"per_image", g.out_dir + "/per_image.jsonl"}};

  if (a.image_quality) {
    std::ofstream f(g.out_dir + "/image_quality.csv");
    f << "experiment,l1,l2,ssim\n";
    f.precision(10);
    auto idq = eval::identity_image_quality(*dataset, data::Split::TEST);
    f << "identity," << idq.l1 << ',' << idq.l2 << ',' << idq.ssim << '\n';
    if (gen) {
      auto mq = eval::model_image_quality(*gen, *dataset, data::Split::TEST);
      f << name << ',' << mq.l1 << ',' << mq.l2 << ',' << mq.ssim << '\n';
    }
    artifacts["image_quality"] = g.out_dir + "/image_quality.csv";
  }

  std::cout << "experiment=" << name << " ard=" << report.ard << " srd=" << report.srd
            << " rmse=" << report.rmse << " log_rmse=" << report.log_rmse << " d1=" << report.d1
            << " d2=" << report.d2 << " d3=" << report.d3 << " n=" << report.n_images << "\n";
  write_manifest(g.out_dir, "eval", artifacts, g);
  return 0;
}

struct MatrixArgs {
  std::string matrix_path;
  int parallel = 1;
};

int cmd_matrix(const GlobalArgs& g, const MatrixArgs& a) {
  std::ifstream in(a.matrix_path);
  if (!in) throw config::ConfigError("matrix: cannot open " + a.matrix_path);
  json doc = json::parse(in);
  if (!doc.contains("base") || !doc.contains("rows"))
    throw config::ConfigError("matrix: file must contain 'base' and 'rows'");
  std::string base_text = doc.at("base").dump();

  struct Row {
    std::string name;
    std::vector<std::string> overrides;
  };
  std::vector<Row> rows;
  std::set<std::string> seen;
  for (const auto& r : doc.at("rows")) {
    Row row;
    row.name = r.at("name").get<std::string>();
    if (!seen.insert(row.name).second)
      throw config::ConfigError("matrix: duplicate row name '" + row.name + "'");
    if (r.contains("set"))
      for (auto it = r.at("set").begin(); it != r.at("set").end(); ++it)
        row.overrides.push_back(it.key() + "=" + it.value().dump());
    rows.push_back(std::move(row));
  }

  fs::create_directories(g.out_dir);
  std::vector<std::pair<std::string, eval::MetricReport>> table(rows.size());
  std::vector<std::string> errors(rows.size());
  std::atomic<size_t> next{0};

  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= rows.size()) return;
      const Row& row = rows[i];
      std::string row_dir = g.out_dir + "/rows/" + row.name;
      try {
        std::vector<std::string> overrides = g.sets;
        for (const auto& o : row.overrides) overrides.push_back(o);
        if (g.seed >= 0) overrides.push_back("train.seed=" + std::to_string(g.seed));
        auto cfg = config::parse_config_text(base_text, overrides);
        fs::create_directories(row_dir);
        {
          std::ofstream f(row_dir + "/config.json");
          f << config::dump_config(cfg) << '\n';
        }
        auto dataset = config::make_dataset(cfg.data);
        engine::TrainOptions opts;
        opts.out_dir = row_dir;
        opts.augment = cfg.data.augment;
        auto records = engine::train_restarts(cfg.train, *dataset, opts);
        std::vector<eval::MetricReport> reports;
        for (size_t k = 0; k < records.size(); ++k) {
          std::ofstream f(row_dir + "/restart_" + std::to_string(k) + "/run_record.json");
          f << record_to_json(records[k]).dump(2) << '\n';
          auto loaded = engine::load_checkpoint(records[k].checkpoint_path);
          reports.push_back(eval::evaluate_model(*loaded.generator, *dataset, data::Split::TEST,
                                                 cfg.eval));
          eval::write_per_image_jsonl(row_dir + "/restart_" + std::to_string(k) + "/per_image.jsonl",
                                      reports.back());
        }
        table[i] = {row.name, mean_of(reports)};
        if (reports.size() >= 2)
          engine::write_restart_csv(row_dir + "/restarts.csv", engine::report_restarts(reports));
      } catch (const std::exception& e) {
        errors[i] = e.what();
        std::cerr << "matrix row '" << row.name << "' failed: " << e.what() << "\n";
      }
    }
  };

  int n_workers = std::max(1, a.parallel);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<std::pair<std::string, eval::MetricReport>> ok_rows;
  json failed = json::array();
  for (size_t i = 0; i < rows.size(); ++i) {
    if (errors[i].empty())
      ok_rows.push_back(table[i]);
    else
      failed.push_back({{"row", rows[i].name}, {"error", errors[i]}});
  }
  eval::write_aggregate_csv(g.out_dir + "/combined_table.csv", ok_rows);
  json artifacts{{"combined_table", g.out_dir + "/combined_table.csv"},
                 {"rows_completed", ok_rows.size()},
                 {"rows_failed", failed}};
  bool all_ok = failed.empty();
  write_manifest(g.out_dir, "matrix", artifacts, g, all_ok);
  if (!all_ok) {
    std::cerr << "matrix: " << failed.size() << "/" << rows.size()
              << " rows failed (partial results in " << g.out_dir << ")\n";
    return 1;
  }
  std::cout << "matrix: " << ok_rows.size() << " rows -> " << g.out_dir << "/combined_table.csv\n";
  return 0;
}

int cmd_plot_scatter(const GlobalArgs& g, const std::string& a_path, const std::string& b_path,
                     const std::string& metric) {
  auto ra = eval::read_per_image_jsonl(a_path);
  auto rb = eval::read_per_image_jsonl(b_path);
  auto points = eval::pairwise_scatter(ra, rb, metric);
  fs::create_directories(g.out_dir);
  eval::write_scatter_csv(g.out_dir + "/scatter.csv", points);
  std::vector<std::pair<double, double>> xy;
  for (const auto& p : points) xy.emplace_back(p.metric_a, p.metric_b);
  plot::scatter_chart(g.out_dir + "/scatter.png", xy);
  write_manifest(g.out_dir, "plot-scatter",
                 json{{"scatter_csv", g.out_dir + "/scatter.csv"},
                      {"scatter_png", g.out_dir + "/scatter.png"}},
                 g);
  std::cout << "scatter: " << points.size() << " points -> " << g.out_dir << "/scatter.png\n";
  return 0;
}

int cmd_plot_curves(const GlobalArgs& g, const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) throw config::ConfigError("plot: cannot open " + log_path);
  plot::Series total{"total", {}, {}, 0.85, 0.25, 0.1};
  plot::Series l1{"l1", {}, {}, 0.1, 0.35, 0.8};
  std::string line;
  int64_t step = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    ++step;
    total.x.push_back(static_cast<double>(step));
    total.y.push_back(j.at("total").get<double>());
    l1.x.push_back(static_cast<double>(step));
    l1.y.push_back(j.at("l1").get<double>());
  }
  fs::create_directories(g.out_dir);
  plot::line_chart(g.out_dir + "/training_curve.png", {total, l1});
  write_manifest(g.out_dir, "plot-curves",
                 json{{"training_curve", g.out_dir + "/training_curve.png"}}, g);
  std::cout << "curves: " << step << " steps -> " << g.out_dir << "/training_curve.png\n";
  return 0;
}

int cmd_plot_grid(const GlobalArgs& g, const std::string& checkpoint, int max_samples) {
  auto cfg = load_cfg(g);
  auto loaded = engine::load_checkpoint(checkpoint);
  auto dataset = config::make_dataset(cfg.data);
  fs::create_directories(g.out_dir);
  int64_t n = std::min<int64_t>(max_samples, dataset->size(data::Split::TEST));
  json files = json::array();
  for (int64_t i = 0; i < n; ++i) {
    auto s = dataset->get(data::Split::TEST, i, false);
    NoRecordGuard norec;
    auto pyr = loaded.generator->forward(Var::leaf(s.left), false);
    Tensor dl = pyr.left[0].val().reshaped({s.left.dim(1), s.left.dim(2)});
    Tensor dr = pyr.right[0].val().reshaped({s.left.dim(1), s.left.dim(2)});
    Tensor recon = geometry::warp(s.left, dr, +1);
    std::string path = g.out_dir + "/grid_" + s.id + ".png";
    plot::triptych(path, s.left, dl, recon);
    files.push_back(path);
  }
  write_manifest(g.out_dir, "plot-grid", json{{"grids", files}}, g);
  std::cout << "grid: " << n << " triptychs -> " << g.out_dir << "\n";
  return 0;
}

int cmd_synth(const GlobalArgs& g) {
  auto cfg = load_cfg(g);
  check(cfg.data.kind == config::DataConfig::Kind::SYNTHETIC,
        "synth: config data.kind must be synthetic");
  auto dataset = config::make_dataset(cfg.data);
  fs::create_directories(g.out_dir + "/images");
  fs::create_directories(g.out_dir + "/depth");
  fs::create_directories(g.out_dir + "/splits");
  for (auto split : {data::Split::TRAIN, data::Split::VAL, data::Split::TEST}) {
    std::ofstream list(g.out_dir + "/splits/" + data::split_name(split) + ".txt");
    for (int64_t i = 0; i < dataset->size(split); ++i) {
      auto s = dataset->get(split, i, /*with_gt=*/true);
      io::write_image_png(g.out_dir + "/images/" + s.id + "_L.png", s.left);
      io::write_image_png(g.out_dir + "/images/" + s.id + "_R.png", s.right);
      if (!s.gt_depth.empty()) io::write_depth_png16(g.out_dir + "/depth/" + s.id + ".png", s.gt_depth);
      list << s.id << '\n';
    }
  }
  json artifacts{{"root", g.out_dir},
                 {"train", dataset->size(data::Split::TRAIN)},
                 {"val", dataset->size(data::Split::VAL)},
                 {"test", dataset->size(data::Split::TEST)}};
  write_manifest(g.out_dir, "synth", artifacts, g);
  std::cout << "synth: wrote dataset to " << g.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depthlab — self-supervised stereo disparity training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config_path, "experiment config JSON");
  app.add_option("--set", g.sets, "dot-path config override key.path=value")->take_all();
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--seed", g.seed, "override train.seed");
  app.add_flag("--deterministic", g.deterministic, "pin deterministic single-thread execution");

  auto* train = app.add_subcommand("train", "train a generator per config");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint (or the gt oracle) on the test split");
  evalc->add_option("--checkpoint", ea.checkpoint, "checkpoint file");
  evalc->add_flag("--oracle", ea.oracle, "evaluate ground-truth-derived disparities");
  evalc->add_flag("--no-flip-merge", ea.no_flip_merge, "disable flip-merge post-processing");
  evalc->add_option("--crop", ea.crop, "evaluation crop: garg|none");
  evalc->add_option("--cap", ea.cap, "depth cap in metres (default 80)");
  evalc->add_flag("!--no-image-quality", ea.image_quality, "skip image quality scores");
  evalc->add_option("--name", ea.experiment_name, "experiment name in the CSV");

  MatrixArgs ma;
  auto* matrix = app.add_subcommand("matrix", "run an ablation matrix (train+eval per row)");
  matrix->add_option("--matrix", ma.matrix_path, "matrix JSON file")->required();
  matrix->add_option("--parallel", ma.parallel, "concurrent rows (CPU TINY runs only)");

  auto* plotc = app.add_subcommand("plot", "emit figures from reports");
  plotc->require_subcommand(1);
  std::string pa, pb, pmetric = "ard", plog, pckpt;
  int pmax = 8;
  auto* ps = plotc->add_subcommand("scatter", "per-image metric scatter of two reports");
  ps->add_option("--a", pa, "per-image JSONL of model A")->required();
  ps->add_option("--b", pb, "per-image JSONL of model B")->required();
  ps->add_option("--metric", pmetric, "metric column (default ard)");
  auto* pc = plotc->add_subcommand("curves", "training curves from a run log");
  pc->add_option("--log", plog, "run_log.jsonl")->required();
  auto* pg = plotc->add_subcommand("grid", "input/disparity/reconstruction triptychs");
  pg->add_option("--checkpoint", pckpt, "checkpoint file")->required();
  pg->add_option("--max-samples", pmax, "triptych count");

  auto* synth = app.add_subcommand("synth", "write the synthetic dataset to disk");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(g);
    if (*evalc) return cmd_eval(g, ea);
    if (*matrix) return cmd_matrix(g, ma);
    if (*plotc) {
      if (*ps) return cmd_plot_scatter(g, pa, pb, pmetric);
      if (*pc) return cmd_plot_curves(g, plog);
      if (*pg) return cmd_plot_grid(g, pckpt, pmax);
    }
    if (*synth) return cmd_synth(g);
  } catch (const config::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

/*
 * Copyright 2026 The modred Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file app.hpp
 * @brief The modred command line: synth, pretrain, pretrain-dist, embed,
 *        reconstruct and eval.
 *
 * Exit codes: 0 success, 2 usage or config, 3 data, 4 protocol, 5 numeric.
 */
#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "modred/cli/run_config.hpp"
#include "modred/datapipe/io.hpp"
#include "modred/datapipe/preprocess.hpp"
#include "modred/datapipe/synth.hpp"
#include "modred/disttrain/roles.hpp"
#include "modred/disttrain/trainer.hpp"
#include "modred/disttrain/transport.hpp"
#include "modred/errors.hpp"
#include "modred/evalkit/classify.hpp"
#include "modred/evalkit/output.hpp"
#include "modred/evalkit/reports.hpp"
#include "modred/log.hpp"

namespace modred::cli {

// Flags shared by every command.
struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string manifest;
  std::string checkpoints;
};

inline RunConfig resolve(const CommonArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.seed) {
    c.seed = *a.seed;
    c.train.master_seed = *a.seed;
    c.synth.rng_seed = *a.seed;
  }
  if (!a.out.empty()) c.out_dir = a.out;
  if (!a.manifest.empty()) c.train.manifest = a.manifest;
  if (!a.checkpoints.empty()) c.train.checkpoint_dir = a.checkpoints;
  if (c.train.checkpoint_dir.empty()) c.train.checkpoint_dir = (fs::path(c.out_dir) / "checkpoints").string();
  c.validate();
  return c;
}

inline std::vector<data::SignalRecord> load_training_records(const RunConfig& c) {
  if (c.train.manifest.empty()) throw ConfigError("no manifest given (use --manifest or train.manifest)");
  return data::prepare_records(data::load_dataset(c.train.manifest), c.preprocess);
}

inline std::vector<mae::Mae1dModel> load_models(const RunConfig& c) {
  std::vector<mae::Mae1dModel> models;
  for (std::size_t ch = 0; ch < c.train.channels; ++ch) {
    models.push_back(std::move(dist::load_channel(c.train.checkpoint_dir, ch, c.train).first.model));
  }
  return models;
}

inline int cmd_synth(const RunConfig& c, std::ostream& out) {
  const fs::path dir = c.out_dir;
  const auto manifest = data::write_dataset(data::synth_generate(c.synth), dir);
  write_resolved_config(c, dir);
  out << "wrote " << c.synth.n_subjects * c.synth.records_per_subject << " records to " << manifest.string() << '\n';
  return 0;
}

inline int cmd_pretrain(const RunConfig& c, bool resume, std::optional<std::int64_t> stop, std::ostream& out) {
  const auto records = load_training_records(c);
  write_resolved_config(c, c.out_dir);
  dist::RunOptions opt;
  opt.resume = resume;
  opt.stop_epoch = stop;
  opt.metrics_path = fs::path(c.out_dir) / "metrics.csv";
  const auto res = dist::train_reference(c.train, c.preprocess, records, opt);
  out << "trained " << c.train.channels << " channel models for " << res.metrics.size() << " epochs; metrics in "
      << opt.metrics_path.string() << '\n';
  return 0;
}

struct DistArgs {
  std::string role;
  std::size_t channel = 0;
  std::string endpoint = "127.0.0.1:7070";
  std::string transport = "memory";
  double connect_timeout_s = 30.0;
};

inline int cmd_pretrain_dist(const RunConfig& c, const DistArgs& d, bool resume, std::optional<std::int64_t> stop,
                             std::ostream& out) {
  const fs::path dir = c.out_dir;
  write_resolved_config(c, dir);
  if (d.role == "coordinator") {
    if (c.train.manifest.empty()) throw ConfigError("the coordinator needs the manifest for record ids");
    std::vector<std::string> ids;
    for (const auto& e : data::load_manifest(c.train.manifest).records) ids.push_back(e.id);
    dist::TcpListener listener(dist::parse_endpoint(d.endpoint));
    dist::CoordinatorOptions opt;
    opt.stop_epoch = stop;
    opt.metrics_path = dir / "metrics_coordinator.csv";
    if (resume) opt.start_epoch = dist::load_channel(c.train.checkpoint_dir, 0, c.train).second;
    out << "coordinator listening on " << d.endpoint << '\n' << std::flush;
    const auto res = dist::serve_coordinator(c.train, ids, listener, opt);
    out << "coordinated " << res.done_received << " worker steps\n";
    return 0;
  }
  if (d.role == "worker") {
    const auto records = load_training_records(c);
    auto conn = dist::tcp_connect(dist::parse_endpoint(d.endpoint),
                                  std::chrono::milliseconds(static_cast<long>(d.connect_timeout_s * 1000)));
    dist::RunOptions opt;
    opt.resume = resume;
    opt.stop_epoch = stop;
    opt.metrics_path = dir / ("metrics_channel_" + std::to_string(d.channel) + ".csv");
    const auto res = dist::run_worker(c.train, c.preprocess, d.channel, records, conn, opt);
    out << "worker " << d.channel << " finished " << res.steps << " steps\n";
    return 0;
  }
  // local
  const auto records = load_training_records(c);
  dist::RunOptions opt;
  opt.resume = resume;
  opt.stop_epoch = stop;
  opt.metrics_path = dir / "metrics.csv";
  const auto res = dist::run_local(c.train, c.preprocess, records, d.transport == "tcp", opt);
  out << "trained " << res.channels.size() << " channel models over " << d.transport << " transport; metrics in "
      << opt.metrics_path.string() << '\n';
  return 0;
}

inline int cmd_embed(const RunConfig& c, std::ostream& out) {
  const auto records = load_training_records(c);
  const auto models = load_models(c);
  const fs::path path = fs::path(c.out_dir) / "embeddings.csv";
  fs::create_directories(c.out_dir);
  eval::export_embeddings(models, records, c.preprocess, c.seed, path);
  write_resolved_config(c, c.out_dir);
  out << "wrote " << records.size() * models.size() << " embeddings to " << path.string() << '\n';
  return 0;
}

// Writes the native reconstruction of every channel and, when source is a
// channel index, every channel decoded from that channel's encoding.
inline int cmd_reconstruct(const RunConfig& c, const std::string& source, double mask_ratio, std::ostream& out) {
  std::optional<std::size_t> src;
  if (source != "native") {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(source, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != source.size() || v >= c.train.channels) {
      throw ConfigError("--source-channel must be 'native' or a channel index below " +
                        std::to_string(c.train.channels));
    }
    src = v;
  }
  const auto records = load_training_records(c);
  const auto models = load_models(c);
  const std::size_t C = models.size();
  const auto& mcfg = models.front().config();
  const fs::path path = fs::path(c.out_dir) / "reconstruction.csv";
  fs::create_directories(c.out_dir);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << "record_id,subject_id,source,channel,sample,original,reconstructed,masked\n";
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto window = data::crop_random(records[k], c.preprocess,
                                          derive_seed(c.seed, {seed_tag::kEval, eval::kTagRecon, k}));
    std::vector<mae::MaskPlan> plans;
    std::vector<mae::EncoderOutput> enc;
    for (std::size_t i = 0; i < C; ++i) {
      plans.push_back(eval::report_mask(mcfg, mask_ratio, c.seed, k, i));
      const auto sig = eval::channel_signal(window, i);
      enc.push_back(models[i].encode(nc::Tensor::from({sig.size()}, sig), &plans.back()));
    }
    auto emit = [&](const std::string& label, std::size_t from, std::size_t ch) {
      const auto rec = eval::to_vector(mae::unpatchify(mae::cross_decode(models[ch], enc[from])));
      const auto orig = eval::channel_signal(window, ch);
      for (std::size_t t = 0; t < orig.size(); ++t) {
        f << records[k].id << ',' << records[k].subject_id << ',' << label << ',' << ch << ',' << t << ','
          << eval::format_real(orig[t]) << ',' << eval::format_real(rec[t]) << ','
          << (plans[from].is_masked(t / mcfg.patch_len) ? 1 : 0) << '\n';
      }
    };
    for (std::size_t ch = 0; ch < C; ++ch) emit("native", ch, ch);
    if (src) {
      for (std::size_t ch = 0; ch < C; ++ch) emit(std::to_string(*src), *src, ch);
    }
  }
  if (!f) throw DataError("failed writing " + path.string());
  write_resolved_config(c, c.out_dir);
  out << "wrote reconstructions of " << records.size() << " records to " << path.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string kind;
  std::size_t repeats = 10;
  std::size_t folds = 0;  // 0: 5 for mi-clf, 10 for knn
  std::size_t channel = 0;
  std::size_t k = 1;
  double mask_ratio = 0.75;
};

inline double upper_triangle_std(const eval::Matrix& m, double mean) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      s += (m[i][j] - mean) * (m[i][j] - mean);
      ++n;
    }
  return n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
}

inline int cmd_eval(const RunConfig& c, const EvalArgs& e, std::ostream& out) {
  const auto records = load_training_records(c);
  const auto models = load_models(c);
  const fs::path dir = c.out_dir;
  const json cfg_json = c;
  if (e.kind == "similarity") {
    const auto rep = eval::similarity_report(models, records, c.preprocess, e.repeats, c.seed);
    eval::write_matrix_csv(dir / "similarity.csv", rep.matrix);
    eval::write_json(dir / "similarity_summary.json",
                     eval::summary_json("embedding_cosine_same_record", rep.same_record_mean,
                                        upper_triangle_std(rep.matrix, rep.same_record_mean), c.seed, cfg_json));
    out << "same-record embedding similarity " << eval::format_real(rep.same_record_mean)
        << ", different-record " << eval::format_real(rep.different_record_mean) << '\n';
  } else if (e.kind == "recon-mae") {
    const auto rep = eval::recon_mae_report(models, records, c.preprocess, e.mask_ratio, c.seed);
    eval::write_matrix_csv(dir / "recon_mae.csv", rep.matrix);
    std::vector<double> all;
    for (const auto& row : rep.matrix) all.insert(all.end(), row.begin(), row.end());
    eval::write_json(dir / "recon_mae_summary.json",
                     eval::summary_json("recon_mae", eval::mean_of(all), eval::std_of(all), c.seed, cfg_json));
    out << "diagonal MAE " << eval::format_real(rep.diagonal_mean()) << ", off-diagonal MAE "
        << eval::format_real(rep.off_diagonal_mean()) << '\n';
  } else if (e.kind == "mi-clf" || e.kind == "knn") {
    if (e.channel >= models.size()) throw ConfigError("--channel out of range");
    const auto table = eval::embed_records(models, records, c.preprocess, c.seed);
    const auto rows = table.channel_rows(e.channel);
    eval::CvResult r;
    std::string stem;
    if (e.kind == "mi-clf") {
      std::vector<int> y;
      for (const auto& rec : records) {
        const auto it = rec.labels.find("mi");
        if (it == rec.labels.end()) throw DataError("record " + rec.id + " has no 'mi' label");
        if (it->second != "0" && it->second != "1") throw DataError("record " + rec.id + ": mi label must be 0 or 1");
        y.push_back(it->second == "1" ? 1 : 0);
      }
      r = eval::logreg_cv(rows, y, e.folds ? e.folds : 5, c.seed);
      stem = "mi_clf";
    } else {
      r = eval::knn_cv(rows, table.subjects, e.k, e.folds ? e.folds : 10, c.seed);
      stem = "knn";
    }
    eval::write_cv_csv(dir / (stem + ".csv"), r);
    eval::write_json(dir / (stem + "_summary.json"), eval::summary_json(r.metric, r.mean, r.std, c.seed, cfg_json));
    out << "mean " << r.metric << ' ' << eval::format_real(r.mean) << '\n';
    for (std::size_t i = 0; i < r.per_fold.size(); ++i) {
      out << "fold " << i << ' ' << eval::format_real(r.per_fold[i]) << '\n';
    }
  } else {
    throw ConfigError("unknown eval kind '" + e.kind + "'");
  }
  write_resolved_config(c, dir);
  return 0;
}

// Parses argv and runs one command; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"modred: multi-channel masked autoencoder pre-training and evaluation"};
  app.require_subcommand(1);
  CommonArgs common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "RunConfig JSON file");
    sub->add_option("--seed", common.seed, "master seed (sets seed, train.master_seed, synth.rng_seed)");
    sub->add_option("--out", common.out, "output directory");
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--manifest", common.manifest, "dataset manifest (overrides train.manifest)");
    sub->add_option("--checkpoints", common.checkpoints, "checkpoint directory (overrides train.checkpoint_dir)");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-channel dataset");
  add_common(synth);

  bool no_align = false, resume = false;
  std::optional<std::int64_t> stop_epoch;
  auto add_train = [&](CLI::App* sub) {
    add_common(sub);
    add_data(sub);
    sub->add_flag("--no-align", no_align, "train without embedding alignment (baseline models)");
    sub->add_flag("--resume", resume, "continue from the checkpoints");
    sub->add_option("--stop-epoch", stop_epoch, "stop after this many epochs in total");
  };
  auto* pretrain = app.add_subcommand("pretrain", "single-process training of all channel models");
  add_train(pretrain);

  DistArgs dist_args;
  auto* pdist = app.add_subcommand("pretrain-dist", "distributed training over the coordinator/worker protocol");
  add_train(pdist);
  pdist->add_option("--role", dist_args.role, "coordinator, worker or local")
      ->required()
      ->check(CLI::IsMember({"coordinator", "worker", "local"}));
  pdist->add_option("--channel", dist_args.channel, "worker channel index");
  pdist->add_option("--endpoint", dist_args.endpoint, "HOST:PORT of the coordinator");
  pdist->add_option("--transport", dist_args.transport, "local role transport")
      ->check(CLI::IsMember({"memory", "tcp"}));
  pdist->add_option("--connect-timeout", dist_args.connect_timeout_s, "worker connect timeout in seconds");

  auto* embed = app.add_subcommand("embed", "export unmasked CLS embeddings per record and channel");
  add_common(embed);
  add_data(embed);

  std::string source = "native";
  double recon_ratio = 0.75;
  auto* recon = app.add_subcommand("reconstruct", "write original and reconstructed traces with mask windows");
  add_common(recon);
  add_data(recon);
  recon->add_option("--source-channel", source, "'native' or the channel index to decode from");
  recon->add_option("--mask-ratio", recon_ratio, "fraction of patches hidden from the encoder");

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "evaluation reports");
  add_common(ev);
  add_data(ev);
  ev->add_option("--kind", eval_args.kind, "similarity, recon-mae, mi-clf or knn")
      ->required()
      ->check(CLI::IsMember({"similarity", "recon-mae", "mi-clf", "knn"}));
  ev->add_option("--repeats", eval_args.repeats, "similarity repeats");
  ev->add_option("--folds", eval_args.folds, "cross-validation folds");
  ev->add_option("--channel", eval_args.channel, "channel whose embeddings are classified");
  ev->add_option("--k", eval_args.k, "neighbours for knn");
  ev->add_option("--mask-ratio", eval_args.mask_ratio, "mask ratio for recon-mae");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    RunConfig cfg = resolve(common);
    if (no_align) {
      cfg.train.align = false;
      cfg.validate();
    }
    if (*synth) return cmd_synth(cfg, out);
    if (*pretrain) return cmd_pretrain(cfg, resume, stop_epoch, out);
    if (*pdist) return cmd_pretrain_dist(cfg, dist_args, resume, stop_epoch, out);
    if (*embed) return cmd_embed(cfg, out);
    if (*recon) return cmd_reconstruct(cfg, source, recon_ratio, out);
    return cmd_eval(cfg, eval_args, out);
  } catch (const Error& e) {
    err << "modred: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const json::exception& e) {
    err << "modred: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  } catch (const fs::filesystem_error& e) {
    err << "modred: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kData);
  }
}

}  // namespace modred::cli

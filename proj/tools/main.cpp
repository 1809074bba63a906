#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "xqsv/dataset_io.hpp"
#include "xqsv/eval.hpp"
#include "xqsv/http.hpp"
#include "xqsv/search.hpp"
#include "xqsv/synthetic.hpp"

namespace fs = std::filesystem;
using namespace xqsv;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Writes an output file, creating its parent directories.
void write_output(const std::string& path, std::string_view bytes) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_file(path, bytes);
}

SplitRatios parse_ratios(const std::string& text) {
  const auto parts = split_list(text);
  if (parts.size() != 3) throw Error(ErrorCode::InvalidConfig, "--ratios needs three comma-separated values");
  return {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
}

EloBin parse_one_bin(const std::string& text) {
  const auto bins = parse_bins(text);
  if (bins.size() != 1) throw Error(ErrorCode::InvalidConfig, "expected a single bin, e.g. 1200-1300");
  return bins.front();
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::vector<GameRecord> ingest_files(const std::vector<std::string>& inputs, bool strict) {
  std::vector<GameRecord> records;
  for (const auto& path : inputs) {
    auto parsed = parse_record_file(read_file(path));
    for (const auto& d : parsed.diagnostics) {
      std::cerr << path << ": game " << d.game + 1 << " (" << d.source_id << ")";
      if (d.ply) std::cerr << " ply " << *d.ply;
      std::cerr << ": " << d.message << "\n";
    }
    if (strict && !parsed.diagnostics.empty()) {
      throw Error(ErrorCode::FormatError, path + ": " + std::to_string(parsed.diagnostics.size()) + " invalid games");
    }
    for (auto& r : parsed.file.records) records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elo-conditioned Xiangqi move imitation toolkit"};
  app.require_subcommand(1);

  // vocab
  auto* vocab_cmd = app.add_subcommand("vocab", "Print the move vocabulary manifest");
  std::string vocab_out;
  vocab_cmd->add_option("--out", vocab_out, "Write the manifest to this file");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic record file from a known policy");
  std::string synth_policy = "uniform", synth_out;
  std::size_t synth_games = 50, synth_plies = 60;
  std::uint64_t synth_seed = 0, synth_weights = 1;
  int synth_elo = 1500;
  double synth_greed = 0.0;
  synth->add_option("--policy", synth_policy, "uniform | preference | keycycle")
      ->check(CLI::IsMember({"uniform", "preference", "keycycle"}));
  synth->add_option("--games", synth_games);
  synth->add_option("--plies", synth_plies, "Maximum plies (keycycle: cycles of 12)");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--weights-seed", synth_weights, "Seed of the preference weights");
  synth->add_option("--greed", synth_greed, "Probability of the preferred move");
  synth->add_option("--elo", synth_elo);
  synth->add_option("--out", synth_out)->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse record files into a dataset directory");
  std::vector<std::string> ingest_inputs;
  std::string ingest_out;
  bool ingest_strict = false;
  ingest->add_option("inputs", ingest_inputs, "Record files")->required();
  ingest->add_option("--output", ingest_out, "Dataset directory")->required();
  ingest->add_flag("--strict", ingest_strict, "Fail on any invalid game");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Window and split an ingested dataset");
  std::string prep_dir, prep_bins = "standard", prep_memory = "5", prep_ratios = "0.8,0.1,0.1", prep_policy = "per_mover";
  std::uint64_t prep_seed = 0;
  prepare->add_option("--dataset", prep_dir)->required();
  prepare->add_option("--bins", prep_bins, "all | standard | lo-hi,... | lo:hi:step");
  prepare->add_option("--memory", prep_memory, "History window m or inf");
  prepare->add_option("--ratios", prep_ratios, "train,validation,test");
  prepare->add_option("--seed", prep_seed);
  prepare->add_option("--bin-policy", prep_policy)->check(CLI::IsMember({"per_mover", "game_average"}));

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on one bin");
  std::string tr_config, tr_dataset, tr_bin, tr_out;
  std::uint64_t tr_seed = 0;
  TrainOptions tr_opts;
  bool tr_reduced = false;
  train_cmd->add_option("--config", tr_config, "Structure config file (key = value)");
  train_cmd->add_option("--dataset", tr_dataset)->required();
  train_cmd->add_option("--bin", tr_bin, "Bin label; defaults to the first bin");
  train_cmd->add_option("--seed", tr_seed);
  train_cmd->add_option("--out", tr_out)->required();
  train_cmd->add_option("--epochs", tr_opts.max_epochs);
  train_cmd->add_option("--batch-size", tr_opts.batch_size);
  train_cmd->add_option("--learning-rate", tr_opts.learning_rate);
  train_cmd->add_option("--patience", tr_opts.patience);
  train_cmd->add_flag("--reduced-width", tr_reduced, "Allow hidden widths outside the candidate table");

  // search
  auto* search_cmd = app.add_subcommand("search", "Five-phase structure search on one bin");
  std::string se_dataset, se_bin, se_plan, se_out;
  std::optional<int> se_budget;
  std::optional<std::uint64_t> se_seed;
  search_cmd->add_option("--dataset", se_dataset)->required();
  search_cmd->add_option("--bin", se_bin);
  search_cmd->add_option("--plan", se_plan, "JSON plan file");
  search_cmd->add_option("--budget", se_budget, "Epochs per candidate");
  search_cmd->add_option("--seed", se_seed);
  search_cmd->add_option("--out", se_out, "Line-delimited JSON log")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate models with strict and relaxed metrics");
  std::vector<std::string> ev_models;
  std::string ev_dataset, ev_bin, ev_k = "1,2,3,5,10,20,50,100", ev_p = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1",
                                  ev_report, ev_plot;
  bool ev_no_filter = false, ev_matrix = false;
  eval_cmd->add_option("--model", ev_models, "Checkpoint (repeat for --matrix)")->required();
  eval_cmd->add_option("--dataset", ev_dataset)->required();
  eval_cmd->add_option("--bin", ev_bin, "Bin to evaluate on; defaults to the model's bin");
  eval_cmd->add_option("--k", ev_k);
  eval_cmd->add_option("--p", ev_p);
  eval_cmd->add_flag("--no-filter", ev_no_filter);
  eval_cmd->add_flag("--matrix", ev_matrix, "Cross-bin top-1 matrix over the given models");
  eval_cmd->add_option("--report", ev_report, "Write a JSON report");
  eval_cmd->add_option("--plot", ev_plot, "Write curve data as CSV");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve models over HTTP");
  std::string sv_models = "models", sv_addr = "127.0.0.1:8080";
  std::optional<std::string> sv_persist, sv_static;
  serve->add_option("--models-dir", sv_models);
  serve->add_option("--addr", sv_addr, "host:port");
  serve->add_option("--persist", sv_persist, "Directory for session logs");
  serve->add_option("--static", sv_static, "Directory of static assets served at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*vocab_cmd) {
      const auto& v = standard_vocabulary();
      if (vocab_out.empty()) {
        std::cout << v.manifest();
      } else {
        write_output(vocab_out, v.manifest());
      }
      std::cerr << v.size() << " tokens\n";
    } else if (*synth) {
      std::vector<GameRecord> recs;
      if (synth_policy == "keycycle") {
        recs = key_cycle_corpus(synth_games, std::max<std::size_t>(1, synth_plies / 12), synth_seed, synth_elo);
      } else {
        const auto policy = synth_policy == "uniform" ? uniform_policy()
                                                      : preference_policy(preference_weights(synth_weights), synth_greed);
        recs = generate_corpus(policy, synth_games, synth_plies, synth_seed, synth_elo, synth_elo);
      }
      write_output(synth_out, serialize_records(recs));
      std::cerr << recs.size() << " games written to " << synth_out << "\n";
    } else if (*ingest) {
      const auto records = ingest_files(ingest_inputs, ingest_strict);
      fs::create_directories(ingest_out);
      write_file((fs::path(ingest_out) / "games.txt").string(), serialize_records(records));
      write_file((fs::path(ingest_out) / "vocabulary.txt").string(), standard_vocabulary().manifest());
      std::cerr << records.size() << " games ingested into " << ingest_out << "\n";
    } else if (*prepare) {
      auto parsed = parse_record_file(read_file((fs::path(prep_dir) / "games.txt").string()));
      PrepareOptions opts;
      opts.bins = parse_bins(prep_bins);
      opts.memory = parse_memory(prep_memory);
      opts.ratios = parse_ratios(prep_ratios);
      opts.seed = prep_seed;
      opts.policy = prep_policy == "per_mover" ? BinPolicy::PerMover : BinPolicy::GameAverage;
      const auto d = prepare_dataset(std::move(parsed.file.records), opts);
      write_dataset(d, prep_dir);
      const auto part = partition_by_elo(d.games, opts.bins, opts.policy);
      std::cout << "bin,train,validation,test,mean_history\n";
      for (const auto& [bin, split] : d.splits) {
        std::cout << bin.label() << "," << split.train.size() << "," << split.validation.size() << ","
                  << split.test.size() << "," << dataset_stats(split.train).mean_history << "\n";
      }
      std::cerr << part.dropped << " games matched no bin\n";
    } else if (*train_cmd) {
      const auto d = read_dataset(tr_dataset);
      const EloBin bin = tr_bin.empty() ? d.options.bins.front() : parse_one_bin(tr_bin);
      const StructureConfig cfg = tr_config.empty() ? StructureConfig{} : StructureConfig::parse(read_file(tr_config));
      const auto split = d.window(bin, cfg.memory);
      Network<float> net(cfg, static_cast<int>(standard_vocabulary().size()), tr_seed, tr_reduced);
      tr_opts.seed = tr_seed;
      const auto res = train(net, split.train, split.validation, tr_opts, [](const EpochRecord& r) {
        std::cerr << "epoch " << r.epoch << " loss " << r.train_loss;
        if (r.validation_accuracy) std::cerr << " val_top1 " << percent(*r.validation_accuracy) << "%";
        std::cerr << " (" << r.seconds << "s)\n";
      });
      ModelMeta meta{bin, res.best_validation_accuracy};
      write_output(tr_out, save_checkpoint(net, meta));
      std::cerr << res.stop_reason << "; best epoch " << res.best_epoch << "\n";
    } else if (*search_cmd) {
      const auto d = read_dataset(se_dataset);
      const EloBin bin = se_bin.empty() ? d.options.bins.front() : parse_one_bin(se_bin);
      SearchPlan plan = se_plan.empty() ? SearchPlan{} : SearchPlan::from_json(nlohmann::json::parse(read_file(se_plan)));
      if (se_budget) plan.budget = *se_budget;
      if (se_seed) plan.seed = *se_seed;
      const auto log = run_search(plan, d.games, d.assignment, bin, d.options.policy, [](const CandidateResult& c) {
        std::cerr << "phase " << c.phase << " #" << c.index << " " << c.value_a << "," << c.value_b << " -> "
                  << (c.validation_accuracy ? percent(*c.validation_accuracy) + "%" : "failed: " + c.failure) << "\n";
      });
      write_output(se_out, log.to_jsonl());
      const SearchLog logs[] = {log};
      std::cout << search_report(logs);
    } else if (*eval_cmd) {
      const auto d = read_dataset(ev_dataset);
      std::vector<std::size_t> ks;
      for (const auto& k : split_list(ev_k)) ks.push_back(std::stoul(k));
      std::vector<double> ps;
      for (const auto& p : split_list(ev_p)) ps.push_back(std::stod(p));
      std::vector<LoadedModel> models;
      for (const auto& m : ev_models) models.push_back(load_checkpoint(read_file(m)));
      if (ev_matrix) {
        // Each row evaluates on every column bin re-windowed with that row's m.
        std::cout << "trained \\ evaluated";
        for (const auto& m : models) std::cout << "," << m.meta.bin.label();
        std::cout << "\n";
        for (std::size_t i = 0; i < models.size(); ++i) {
          std::cout << models[i].meta.bin.label();
          for (std::size_t j = 0; j < models.size(); ++j) {
            const auto data = d.window(models[j].meta.bin, models[i].net.config().memory).test;
            std::cout << "," << percent(evaluate(models[i].net, data, d.games, {}, {}, !ev_no_filter).top1);
          }
          std::cout << "\n";
        }
      } else {
        const auto& m = models.front();
        const EloBin bin = ev_bin.empty() ? m.meta.bin : parse_one_bin(ev_bin);
        const auto data = d.window(bin, m.net.config().memory).test;
        const auto rep = evaluate(m.net, data, d.games, ks, ps, !ev_no_filter, bin.label());
        std::cout << "bin " << rep.label << ", " << rep.count << " samples, filter " << (rep.filtered ? "on" : "off")
                  << ", top-1 " << percent(rep.top1) << "%\n";
        std::cout << "k | top-k acc.\n";
        for (const auto& [k, v] : rep.top_k) std::cout << k << " | " << percent(v) << "\n";
        std::cout << "p | top-p acc.\n";
        for (const auto& [p, v] : rep.top_p) std::cout << detail::number_text(p) << " | " << percent(v) << "\n";
        if (!ev_report.empty()) {
          nlohmann::json j = {{"bin", rep.label}, {"count", rep.count}, {"top1", rep.top1},
                              {"filtered", rep.filtered}, {"anomalies", rep.anomalies}};
          for (const auto& [k, v] : rep.top_k) j["top_k"][std::to_string(k)] = v;
          for (const auto& [p, v] : rep.top_p) j["top_p"][detail::number_text(p)] = v;
          write_output(ev_report, j.dump(2) + "\n");
        }
        if (!ev_plot.empty()) {
          std::string csv = "metric,x,accuracy\n";
          for (const auto& [k, v] : rep.top_k) csv += "top_k," + std::to_string(k) + "," + std::to_string(v) + "\n";
          for (const auto& [p, v] : rep.top_p) csv += "top_p," + detail::number_text(p) + "," + std::to_string(v) + "\n";
          write_output(ev_plot, csv);
        }
      }
    } else if (*serve) {
      Service service(ModelRegistry(sv_models), sv_persist ? std::optional<fs::path>(*sv_persist) : std::nullopt);
      httplib::Server server;
      install_routes(server, service, sv_static);
      const auto colon = sv_addr.rfind(':');
      const auto host = sv_addr.substr(0, colon);
      const int port = std::stoi(sv_addr.substr(colon + 1));
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) throw Error(ErrorCode::IoError, "cannot listen on " + sv_addr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

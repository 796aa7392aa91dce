// Command-line front end: run experiments, evaluate saved synthetic sets,
// and inspect payload files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "collabdm/data.hpp"
#include "collabdm/errors.hpp"
#include "collabdm/eval.hpp"
#include "collabdm/orchestrator.hpp"
#include "collabdm/protocol.hpp"
#include "collabdm/serialize.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace collabdm;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct DatasetFlags {
  bool toy = false;
  int toy_classes = 4;
  int toy_per_class = 64;
  int toy_per_class_test = 16;
  int toy_channels = 1;
  int toy_size = 16;
  double toy_spread = 0.15;
  std::string train_images, train_labels, test_images, test_labels;

  void add_to(CLI::App& app) {
    app.add_flag("--toy", toy, "use the synthetic toy generator");
    app.add_option("--toy-classes", toy_classes, "toy classes");
    app.add_option("--toy-per-class", toy_per_class,
                   "toy training examples per class");
    app.add_option("--toy-per-class-test", toy_per_class_test,
                   "toy test examples per class");
    app.add_option("--toy-channels", toy_channels, "toy image channels");
    app.add_option("--toy-size", toy_size, "toy image height/width");
    app.add_option("--toy-spread", toy_spread, "toy noise std");
    app.add_option("--train-images", train_images, "training images (.cdt)");
    app.add_option("--train-labels", train_labels, "training labels (.cdl)");
    app.add_option("--test-images", test_images, "test images (.cdt)");
    app.add_option("--test-labels", test_labels, "test labels (.cdl)");
  }

  ToyData load(uint64_t seed) const {
    if (toy) {
      ToyConfig cfg;
      cfg.num_classes = toy_classes;
      cfg.per_class = toy_per_class;
      cfg.per_class_test = toy_per_class_test;
      cfg.channels = toy_channels;
      cfg.height = toy_size;
      cfg.width = toy_size;
      cfg.spread = toy_spread;
      cfg.seed = seed;
      return generate_toy(cfg);
    }
    if (train_images.empty() || train_labels.empty() || test_images.empty() ||
        test_labels.empty()) {
      throw ConfigError("provide --toy or all of --train-images, "
                        "--train-labels, --test-images, --test-labels");
    }
    ToyData data;
    data.train = load_raw(train_images, train_labels, {.split = "train"});
    data.test = load_raw(test_images, test_labels,
                         {.split = "test",
                          .num_classes = data.train.num_classes});
    return data;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << text;
}

int cmd_run(const DatasetFlags& data_flags, const RunConfig& base,
            const std::string& mode_str, int blocks, int channels, int kernel,
            const std::string& eval_arch, const std::string& out_dir) {
  RunConfig config = base;
  config.mode = mode_from_string(mode_str);
  config.eval_arch = arch_from_string(eval_arch);

  const ToyData data = data_flags.load(
      RngStream(config.master_seed).substream("toy").key());

  config.encoder.num_blocks = blocks;
  config.encoder.channels = channels;
  config.encoder.kernel = kernel;
  config.encoder.in_channels = data.train.images.dim(1);
  config.encoder.in_h = data.train.images.dim(2);
  config.encoder.in_w = data.train.images.dim(3);
  config.partition.seed = config.master_seed;

  fs::create_directories(out_dir);
  ProtocolTrace trace;
  const RunReport report = run(config, data.train, data.test, &trace);

  // report.json
  json j;
  j["mode"] = mode_name(report.mode);
  j["config"] = {
      {"clients", config.partition.clients},
      {"beta", config.partition.beta},
      {"epsilon", config.epsilon},
      {"ipc", config.dm.ipc},
      {"global_ipc", config.resolved_global_ipc()},
      {"pae", config.dm.pae_l},
      {"iters", config.rounds},
      {"local_iters", config.dm.local_iters},
      {"batch", config.dm.batch},
      {"lr_local", config.dm.local_lr},
      {"lr_server", config.dm.server_lr},
      {"momentum", config.dm.momentum},
      {"eval_every", config.eval_every},
      {"eval_repeats", config.eval_repeats},
      {"eval_arch", arch_name(config.eval_arch)},
      {"seed", config.master_seed},
      {"encoder",
       {{"blocks", config.encoder.num_blocks},
        {"channels", config.encoder.channels},
        {"kernel", config.encoder.kernel},
        {"embedding_dim", config.encoder.embedding_dim()}}},
  };
  j["loss_trace"] = report.loss_trace;
  json acc = json::array();
  for (const auto& p : report.accuracy) {
    acc.push_back({{"iteration", p.iteration},
                   {"bytes_per_client", p.bytes_per_client},
                   {"mean_accuracy", p.mean},
                   {"std_accuracy", p.stddev}});
  }
  j["accuracy"] = acc;
  j["downlink_bytes"] = report.downlink_bytes;
  j["uplink_bytes"] = report.uplink_bytes;
  write_text(fs::path(out_dir) / "report.json", j.dump(2) + "\n");

  // losses.csv
  std::string losses = "iteration,loss\n";
  for (size_t t = 0; t < report.loss_trace.size(); ++t) {
    losses += std::to_string(t + 1) + "," + fmt_double(report.loss_trace[t]) +
              "\n";
  }
  write_text(fs::path(out_dir) / "losses.csv", losses);

  // accuracy.csv (iteration, bytes transmitted per client, accuracy)
  std::string accs = "iteration,bytes_per_client,mean_accuracy,std_accuracy\n";
  for (const auto& p : report.accuracy) {
    accs += std::to_string(p.iteration) + "," +
            std::to_string(p.bytes_per_client) + "," + fmt_double(p.mean) +
            "," + fmt_double(p.stddev) + "\n";
  }
  write_text(fs::path(out_dir) / "accuracy.csv", accs);

  save_synthetic(fs::path(out_dir) / "synthetic.cdt", report.synthetic);

  for (size_t k = 0; k < report.seed_batch_messages.size(); ++k) {
    write_file_bytes(fs::path(out_dir) /
                         ("seeds_client_" + std::to_string(k) + ".cdm"),
                     report.seed_batch_messages[k]);
  }
  for (size_t k = 0; k < report.payload_messages.size(); ++k) {
    write_file_bytes(fs::path(out_dir) /
                         ("payload_client_" + std::to_string(k) + ".cdm"),
                     report.payload_messages[k]);
  }

  // Keep the held-out split next to the outputs so `eval` can reuse it.
  if (data_flags.toy) {
    save_raw(data.test, fs::path(out_dir) / "test_images.cdt",
             fs::path(out_dir) / "test_labels.cdl");
  }

  if (!report.accuracy.empty()) {
    const auto& last = report.accuracy.back();
    std::cout << "final accuracy " << last.mean << " (+/- " << last.stddev
              << ") after " << last.iteration << " iterations\n";
  }
  return 0;
}

int cmd_eval(const std::string& synthetic_path, const std::string& test_images,
             const std::string& test_labels,
             const std::vector<std::string>& archs, int repeats, int epochs,
             double lr, double momentum, int batch, int blocks, int channels,
             int kernel, int mlp_hidden, uint64_t seed,
             const std::string& out_csv) {
  const SyntheticSet synthetic = load_synthetic(synthetic_path);
  const Dataset test = load_raw(test_images, test_labels,
                                {.split = "test",
                                 .num_classes = synthetic.num_classes});

  std::vector<ClassifierSpec> specs;
  for (const auto& name : archs) {
    ClassifierSpec spec;
    spec.arch = arch_from_string(name);
    spec.conv.num_blocks = blocks;
    spec.conv.channels = channels;
    spec.conv.kernel = kernel;
    spec.conv.in_channels = synthetic.channels;
    spec.conv.in_h = synthetic.height;
    spec.conv.in_w = synthetic.width;
    spec.mlp_hidden = mlp_hidden;
    spec.num_classes = synthetic.num_classes;
    spec.epochs = epochs;
    spec.lr = lr;
    spec.momentum = momentum;
    spec.batch_size = batch;
    spec.seed = seed;
    specs.push_back(spec);
  }

  const auto row = cross_arch_eval(synthetic, specs, test, repeats);
  std::string csv = "architecture,mean_accuracy,std_accuracy\n";
  for (size_t i = 0; i < row.size(); ++i) {
    std::cout << archs[i] << ": " << row[i].mean << " (+/- " << row[i].stddev
              << ")\n";
    csv += archs[i] + "," + fmt_double(row[i].mean) + "," +
           fmt_double(row[i].stddev) + "\n";
  }
  if (!out_csv.empty()) {
    write_text(out_csv, csv);
  }
  return 0;
}

int cmd_inspect(const std::string& payload_path, uint64_t master, int iters,
                int clients, double eps, bool have_schedule) {
  const auto bytes = read_file_bytes(payload_path);
  const ClientPayload payload = decode_payload(bytes);

  std::cout << "client " << payload.client_id << "\n"
            << "classes " << payload.num_classes << ", embedding_dim "
            << payload.embedding_dim << "\n"
            << "synthetic: ipc " << payload.synthetic.ipc << ", pae "
            << payload.synthetic.pae_l << ", image "
            << payload.synthetic.channels << "x" << payload.synthetic.height
            << "x" << payload.synthetic.width << " ("
            << payload.synthetic.stored_scalars() << " stored scalars)\n"
            << "assigned rounds " << payload.rounds.size() << "\n";

  size_t vectors = 0;
  std::vector<int> presence;
  for (const auto& round : payload.rounds) {
    int count = 0;
    for (uint8_t b : round.present) {
      count += b;
    }
    presence.push_back(count);
    vectors += static_cast<size_t>(count);
  }
  std::cout << "mean vectors " << vectors;
  if (!payload.rounds.empty()) {
    std::cout << " (presence "
              << static_cast<double>(vectors) /
                     (payload.rounds.size() *
                      static_cast<size_t>(payload.num_classes))
              << ")";
  }
  std::cout << "\n";

  const auto& s = payload.synthetic;
  const size_t formula = payload_bytes(
      static_cast<int>(payload.rounds.size()), payload.num_classes,
      payload.embedding_dim,
      synthetic_bytes(s.num_classes, s.ipc, s.channels, s.height, s.width),
      presence);
  std::cout << "bytes " << bytes.size() << " (formula " << formula << ", "
            << (formula == bytes.size() ? "match" : "MISMATCH") << ")\n";

  if (have_schedule) {
    const SeedSchedule schedule = build_schedule(master, iters, clients, eps);
    const SeedBatch expected = schedule.batch_for(payload.client_id);
    std::cout << "schedule: T " << schedule.rounds << ", K "
              << schedule.clients << ", |Z_t| "
              << (schedule.rounds > 0 ? schedule.participants[0].size()
                                      : static_cast<size_t>(0))
              << ", assigned to this client " << expected.seeds.size()
              << (expected.seeds.size() == payload.rounds.size()
                      ? " (consistent)"
                      : " (INCONSISTENT)")
              << "\n";
  }
  return formula == bytes.size() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative data distillation simulator"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "run an experiment");
  DatasetFlags data_flags;
  data_flags.add_to(*run_cmd);
  RunConfig config;
  std::string mode_str = "collabdm";
  std::string eval_arch = "convnet";
  std::string out_dir;
  int blocks = 2, channels = 16, kernel = 3;
  run_cmd->add_option("--mode", mode_str,
                      "collabdm | localdm | centralized");
  run_cmd->add_option("--clients", config.partition.clients, "client count");
  run_cmd->add_option("--beta", config.partition.beta,
                      "Dirichlet concentration");
  run_cmd->add_option("--eps", config.epsilon, "participation fraction");
  run_cmd->add_option("--ipc", config.dm.ipc, "images per class");
  run_cmd->add_option("--global-ipc", config.global_ipc,
                      "server per-class budget (0 = ipc, -1 = full union)");
  run_cmd->add_option("--iters", config.rounds, "server iterations T");
  run_cmd->add_option("--batch", config.dm.batch, "real-data batch size");
  run_cmd->add_option("--lr-local", config.dm.local_lr, "local learning rate");
  run_cmd->add_option("--lr-server", config.dm.server_lr,
                      "server learning rate");
  run_cmd->add_option("--local-iters", config.dm.local_iters,
                      "local distillation iterations");
  run_cmd->add_option("--momentum", config.dm.momentum, "SGD momentum");
  run_cmd->add_option("--pae", config.dm.pae_l, "partition-and-expand factor");
  run_cmd->add_option("--eval-every", config.eval_every,
                      "accuracy checkpoint cadence");
  run_cmd->add_option("--eval-repeats", config.eval_repeats,
                      "classifiers per checkpoint");
  run_cmd->add_option("--eval-arch", eval_arch, "convnet | mlp");
  run_cmd->add_option("--mlp-hidden", config.mlp_hidden, "mlp hidden width");
  run_cmd->add_option("--blocks", blocks, "encoder blocks");
  run_cmd->add_option("--channels", channels, "encoder channels");
  run_cmd->add_option("--kernel", kernel, "encoder kernel size");
  run_cmd->add_option("--seed", config.master_seed, "master seed");
  run_cmd->add_option("--out", out_dir, "output directory")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved synthetic set");
  std::string synthetic_path, etest_images, etest_labels, out_csv;
  std::vector<std::string> archs{"convnet"};
  int repeats = 20, epochs = 300, ebatch = 64, eblocks = 2, echannels = 16,
      ekernel = 3, emlp_hidden = 128;
  double elr = 0.01, emomentum = 0.9;
  uint64_t eseed = 0;
  eval_cmd->add_option("--synthetic", synthetic_path, "synthetic set file")
      ->required();
  eval_cmd->add_option("--test-images", etest_images, "test images (.cdt)")
      ->required();
  eval_cmd->add_option("--test-labels", etest_labels, "test labels (.cdl)")
      ->required();
  eval_cmd->add_option("--arch", archs,
                       "architectures to train (convnet and/or mlp)");
  eval_cmd->add_option("--repeats", repeats, "networks per architecture");
  eval_cmd->add_option("--epochs", epochs, "training epochs");
  eval_cmd->add_option("--lr", elr, "classifier learning rate");
  eval_cmd->add_option("--momentum", emomentum, "classifier momentum");
  eval_cmd->add_option("--batch", ebatch, "classifier batch size");
  eval_cmd->add_option("--blocks", eblocks, "convnet blocks");
  eval_cmd->add_option("--channels", echannels, "convnet channels");
  eval_cmd->add_option("--kernel", ekernel, "convnet kernel");
  eval_cmd->add_option("--mlp-hidden", emlp_hidden, "mlp hidden width");
  eval_cmd->add_option("--seed", eseed, "evaluation seed");
  eval_cmd->add_option("--out-csv", out_csv, "write the accuracy table here");

  // inspect
  auto* inspect_cmd =
      app.add_subcommand("inspect", "describe a saved payload file");
  std::string payload_path;
  uint64_t imaster = 0;
  int iiters = 0, iclients = 0;
  double ieps = 1.0;
  inspect_cmd->add_option("--payload", payload_path, "payload .cdm file")
      ->required();
  auto* opt_master =
      inspect_cmd->add_option("--schedule-master", imaster, "master seed");
  inspect_cmd->add_option("--schedule-iters", iiters, "schedule T");
  inspect_cmd->add_option("--schedule-clients", iclients, "schedule K");
  inspect_cmd->add_option("--schedule-eps", ieps, "schedule epsilon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      return app.exit(e);
    }
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (run_cmd->parsed()) {
      return cmd_run(data_flags, config, mode_str, blocks, channels, kernel,
                     eval_arch, out_dir);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(synthetic_path, etest_images, etest_labels, archs,
                      repeats, epochs, elr, emomentum, ebatch, eblocks,
                      echannels, ekernel, emlp_hidden, eseed, out_csv);
    }
    if (inspect_cmd->parsed()) {
      return cmd_inspect(payload_path, imaster, iiters, iclients, ieps,
                         opt_master->count() > 0);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

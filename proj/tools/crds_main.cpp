// Copyright 2026 The CRDS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// crds: command-line driver for sharded representation-based data selection.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crds/error.hpp"
#include "crds/pipeline.hpp"
#include "crds/selection.hpp"
#include "crds/storage.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t workers = 0;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "JSON key/value config file");
  cmd->add_option("-s,--set", opts.overrides, "Override a config key: key=value (repeatable)")
      ->allow_extra_args(false);
  cmd->add_option("-w,--workers", opts.workers, "Concurrent workers (never changes outputs)");
  cmd->add_option("-o,--out-dir", opts.out_dir, "Artifact directory");
}

crds::PipelineConfig load_config(const CommonOptions& opts) {
  crds::PipelineConfig config;
  // Environment only supplies the default artifact directory.
  if (const char* dir = std::getenv("CRDS_OUT_DIR")) config.out_dir = dir;
  if (!opts.config_path.empty()) config.merge_json_file(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw crds::InvalidArgument("--set expects key=value, got '" + kv + "'");
    }
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.workers > 0) config.workers = opts.workers;
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  return config;
}

void print_descriptor(const crds::ShardSetDescriptor& d) {
  nlohmann::json shards = nlohmann::json::array();
  for (const auto& s : d.shards) {
    shards.push_back({{"path", s.path.string()},
                      {"shard_index", s.header.shard_index},
                      {"count", s.header.count},
                      {"pad_rows", s.header.pad_rows}});
  }
  std::cout << nlohmann::json{{"total_count", d.total_count},
                              {"v", d.v},
                              {"layers", d.layers},
                              {"num_shards", d.num_shards()},
                              {"shards", shards}}
                   .dump(2)
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crds: rank an instruction-tuning pool by representation similarity "
               "to a test set"};
  app.require_subcommand(1);

  CommonOptions embed_opts, ingest_opts, fit_opts, sim_opts, select_opts, pipe_opts;

  auto* embed = app.add_subcommand("embed", "Encode pool and test items into shard files");
  add_common(embed, embed_opts);

  auto* ingest = app.add_subcommand("ingest", "Validate externally produced shard files");
  add_common(ingest, ingest_opts);
  std::vector<std::string> ingest_paths;
  ingest->add_option("shards", ingest_paths, "Shard files")->required();

  auto* fit = app.add_subcommand("fit-whiten", "Fit and save the whitening transformer");
  add_common(fit, fit_opts);

  auto* sim = app.add_subcommand("similarity", "Compute the pool x test similarity matrix");
  add_common(sim, sim_opts);

  auto* select = app.add_subcommand("select", "Select k pool items from the similarity matrix");
  add_common(select, select_opts);

  auto* overlap = app.add_subcommand("overlap", "Compare two selection files");
  std::string overlap_a, overlap_b, overlap_out;
  overlap->add_option("a", overlap_a, "First selection (JSONL)")->required();
  overlap->add_option("b", overlap_b, "Second selection (JSONL)")->required();
  overlap->add_option("--out", overlap_out, "Write the report here instead of stdout");

  auto* pipeline = app.add_subcommand("pipeline", "Run embed -> fit-whiten -> similarity -> select");
  add_common(pipeline, pipe_opts);
  bool resume = false;
  pipeline->add_flag("--resume", resume, "Skip stages whose artifacts already exist");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*embed) {
      const auto out = crds::run_embed(load_config(embed_opts));
      for (const auto& p : out.pool_shards) std::cout << p.string() << '\n';
      std::cout << out.test_shard.string() << '\n';
    } else if (*ingest) {
      const auto config = load_config(ingest_opts);
      const std::vector<std::filesystem::path> paths(ingest_paths.begin(), ingest_paths.end());
      print_descriptor(crds::run_ingest(config, paths));
    } else if (*fit) {
      const auto config = load_config(fit_opts);
      const auto t = crds::run_fit_whiten(config);
      std::cout << crds::layout_for(config).transformer().string() << " v=" << t.v()
                << " beta=" << t.beta() << " fit_count=" << t.fit_count() << '\n';
    } else if (*sim) {
      const auto config = load_config(sim_opts);
      const auto s = crds::run_similarity(config);
      std::cout << crds::layout_for(config).similarity().string() << " " << s.rows() << "x"
                << s.cols() << '\n';
    } else if (*select) {
      const auto config = load_config(select_opts);
      const auto r = crds::run_select(config);
      std::cout << crds::layout_for(config).selection().string() << " k=" << r.k << '\n';
    } else if (*overlap) {
      const auto report = crds::selection_overlap(crds::read_selection(overlap_a),
                                                  crds::read_selection(overlap_b));
      const std::string text = crds::overlap_report_json(report);
      if (overlap_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(overlap_out);
        if (!out) throw crds::IoError("cannot write " + overlap_out);
        out << text;
      }
    } else if (*pipeline) {
      const auto out = crds::run_pipeline(load_config(pipe_opts), resume);
      for (const auto& p : out.artifacts) std::cout << p.string() << '\n';
    }
  } catch (const crds::Error& e) {
    std::cerr << "crds: " << e.what() << '\n';
    return crds::exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "crds: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

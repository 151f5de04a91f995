// Copyright 2026 The shapemem Authors
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

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "shapemem/commands.hpp"
#include "shapemem/error.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> out;
  std::optional<std::string> manifest;
  std::optional<int> k;
  std::optional<double> alpha;
  std::optional<int> n_s;
  std::optional<double> lambda;
  std::optional<int> epochs;
};

void add_overrides(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON run config; flags override its fields");
  app->add_option("--seed", o.seed, "training seed");
  app->add_option("--mode", o.mode, "replay | finetune | joint | raw_exemplar");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--manifest", o.manifest, "dataset manifest");
  app->add_option("--k", o.k, "modes per shape model");
  app->add_option("--alpha", o.alpha, "replay perturbation scale");
  app->add_option("--n-s", o.n_s, "replay samples per old class per epoch");
  app->add_option("--lambda", o.lambda, "mode penalty weight");
  app->add_option("--epochs", o.epochs, "epochs per session");
}

shapemem::RunConfig resolve(const Overrides& o) {
  shapemem::RunConfig cfg = o.config.empty() ? shapemem::RunConfig{} : shapemem::load_config(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.mode) cfg.mode = shapemem::mode_from_name(*o.mode);
  if (o.out) cfg.out = *o.out;
  if (o.manifest) cfg.manifest = *o.manifest;
  if (o.k) cfg.train.k = *o.k;
  if (o.alpha) cfg.train.alpha = *o.alpha;
  if (o.n_s) cfg.train.n_s = *o.n_s;
  if (o.lambda) cfg.train.loss.lambda = *o.lambda;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shape-model replay for class-incremental point cloud classification"};
  app.require_subcommand(1);

  Overrides o;
  std::string model_path;
  CLI::App* bench = app.add_subcommand("bench", "write the synthetic benchmark to --out");
  CLI::App* build = app.add_subcommand("build", "build shape models for every class of --manifest");
  CLI::App* train = app.add_subcommand("train", "run the incremental protocol and write metrics");
  CLI::App* config = app.add_subcommand("config", "print the effective config as canonical JSON");
  CLI::App* inspect = app.add_subcommand("inspect", "summarize a shape model file");
  for (CLI::App* sub : {bench, build, train, config}) add_overrides(sub, o);
  inspect->add_option("model", model_path, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : shapemem::kExitConfig;
  }

  if (inspect->parsed()) return shapemem::cmd_inspect(model_path, std::cout, std::cerr);

  shapemem::RunConfig cfg;
  try {
    cfg = resolve(o);
  } catch (const shapemem::Error& e) {
    std::cerr << "shapemem: " << e.what() << "\n";
    return shapemem::kExitConfig;
  }
  if (bench->parsed()) return shapemem::cmd_bench(cfg, std::cout, std::cerr);
  if (build->parsed()) return shapemem::cmd_build(cfg, std::cout, std::cerr);
  if (train->parsed()) return shapemem::cmd_train(cfg, std::cout, std::cerr);
  std::cout << shapemem::to_json_text(cfg);
  return shapemem::kExitOk;
}

// Builds a toy workspace with scripted behaviors and a bench suite, so the
// CLI can be tried without a model endpoint.
#include <fmt/format.h>

#include <iostream>

#include "CLI11.hpp"
#include "fixture.hpp"

int main(int argc, char** argv) {
  namespace fx = medpipe::fixture;
  std::string dir;
  int samples = 40;
  CLI::App app{"Create a demo workspace for medpipe", "make_demo_fixture"};
  app.add_option("dir", dir, "Directory to create")->required();
  app.add_option("--samples", samples, "Toy dataset size")->check(CLI::Range(4, 10000));
  CLI11_PARSE(app, argc, argv);

  if (std::filesystem::exists(dir) && !std::filesystem::is_empty(dir)) {
    std::cerr << fmt::format("error: {} is not empty\n", dir);
    return 1;
  }
  const auto ws = fx::build_toy_workspace(dir, samples);
  const auto behaviors = ws.root / "behaviors";
  fx::write_json(behaviors / "happy.json", fx::pipeline_behavior());
  fx::write_json(behaviors / "train_fails_once.json", fx::pipeline_behavior(fx::Fault::train_fails_once));
  fx::write_json(behaviors / "dataloader_fails.json", fx::pipeline_behavior(fx::Fault::dataloader_fails));
  nlohmann::json suite = nlohmann::json::array();
  suite.push_back({{"id", "chest-dx"},
                   {"task", "Train a classifier that tells pneumonia from healthy chest CT."},
                   {"category", "DisDiag"},
                   {"expected_dataset", std::string(fx::kToyDataset)},
                   {"runs", 3},
                   {"scripted_behavior", "behaviors/happy.json"}});
  suite.push_back({{"id", "chest-dx-broken-loader"},
                   {"task", "Diagnose pneumonia from chest CT volumes."},
                   {"category", "DisDiag"},
                   {"expected_dataset", std::string(fx::kToyDataset)},
                   {"runs", 2},
                   {"scripted_behavior", "behaviors/dataloader_fails.json"}});
  fx::write_json(ws.root / "suite.json", suite);
  std::cout << fmt::format("demo workspace ready at {}\n", ws.root.string());
  return 0;
}

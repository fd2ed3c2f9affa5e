#include "fixture.hpp"

#include <fmt/format.h>

#include <fstream>

#include "medpipe/workspace.hpp"

namespace medpipe::fixture {

void write_text(const fs::path& file, std::string_view text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << text;
}

void write_json(const fs::path& file, const nlohmann::json& doc) { write_text(file, doc.dump(2) + "\n"); }

std::vector<std::string> toy_sample_paths(int samples) {
  std::vector<std::string> out;
  for (int i = 0; i < samples; ++i) {
    out.push_back(fmt::format("class{}/s{:03d}.npy", i < samples / 2 ? 0 : 1, i));
  }
  return out;
}

std::string train_stub_script() {
  return R"(#!/bin/sh
# toy launcher for the diagnosis template
set -e
out=Logout
mkdir -p "$out"
test -f Datapath/train.json  # you must not modify this line
: > "$out/train.log"
loss=1000
for epoch in 1 2 3 4 5; do
  loss=$((loss * 7 / 10))
  printf 'epoch %d loss 0.%03d\n' "$epoch" "$loss" >> "$out/train.log"
done
printf 'toy-linear-model\n' > "$out/model.bin"
cat "$out/train.log"
echo "FINAL_METRIC accuracy=0.875"
)";
}

namespace {

constexpr std::string_view kTrainPy = R"(# training entry point for the diagnosis template
import json
import sys

def main():
    with open("Datapath/train.json") as fh:  # you must not modify this line
        items = json.load(fh)
    print("samples", len(items))

if __name__ == "__main__":
    main()
)";

constexpr std::string_view kDataloaderExample = R"(import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))


class ToyDataset:
    def __init__(self, split):
        with open(os.path.join(HERE, split + ".json")) as fh:
            self.items = json.load(fh)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        item = self.items[i]
        return item["image"], item["label"]
)";

constexpr std::string_view kMakeIndexPy = R"(import json
import os
import random
import sys

root, out = sys.argv[1], sys.argv[2]
overlap = len(sys.argv) > 3 and sys.argv[3] == "overlap"
classes = sorted(d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
samples = []
for label, name in enumerate(classes):
    for f in sorted(os.listdir(os.path.join(root, name))):
        if f.endswith(".npy"):
            samples.append({"image": name + "/" + f, "label": label})
rng = random.Random(7)
rng.shuffle(samples)
cut = int(len(samples) * 0.8)
test_from = cut - 1 if overlap else cut
os.makedirs(out, exist_ok=True)
with open(os.path.join(out, "train.json"), "w") as fh:
    json.dump(samples[:cut], fh, indent=1)
with open(os.path.join(out, "test.json"), "w") as fh:
    json.dump(samples[test_from:], fh, indent=1)
with open(os.path.join(out, "label_dict.json"), "w") as fh:
    json.dump(dict((n, i) for i, n in enumerate(classes)), fh, indent=1)
print("train", cut, "test", len(samples) - test_from)
)";

constexpr std::string_view kDataloaderPy = R"(import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))


class ToyDataset:
    def __init__(self, split):
        with open(os.path.join(HERE, split + ".json")) as fh:
            self.items = json.load(fh)
        with open(os.path.join(HERE, "label_dict.json")) as fh:
            self.labels = json.load(fh)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        item = self.items[i]
        return item["image"], item["label"]


if __name__ == "__main__":
    for split in ("train", "test"):
        ds = ToyDataset(split)
        seen = 0
        for i in range(len(ds)):
            ds[i]
            seen += 1
        print(split, seen)
)";

constexpr std::string_view kBrokenDataloaderPy = R"(import json


def load(split):
    with open("Datapath/" + split + ".json") as fh:
        return [item["mask"] for item in json.load(fh)]


if __name__ == "__main__":
    load("train")
)";

constexpr std::string_view kBrokenTrainSh = R"(#!/bin/sh
echo "Traceback (most recent call last):" >&2
echo "NameError: name 'learning_rate' is not defined" >&2
exit 1
)";

}  // namespace

ToyWorkspace build_toy_workspace(const fs::path& root, int samples) {
  ToyWorkspace ws;
  ws.root = fs::absolute(root);
  ws.samples = samples;
  ws.dataset_dir = ws.root / "datasets" / std::string(kToyDataset);

  std::string csv = "file,label\n";
  for (const auto& rel : toy_sample_paths(samples)) {
    write_text(ws.dataset_dir / rel, "toy sample " + rel + "\n");
    csv += fmt::format("{},{}\n", rel, rel.substr(5, 1));
  }
  write_text(ws.dataset_dir / "labels.csv", csv);

  const auto seg_dir = ws.root / "datasets" / std::string(kToySegDataset);
  for (int i = 0; i < 4; ++i) {
    write_text(seg_dir / "images" / fmt::format("case{}.npy", i), "image\n");
    write_text(seg_dir / "masks" / fmt::format("case{}.npy", i), "mask\n");
  }

  nlohmann::ordered_json cards = nlohmann::ordered_json::array();
  cards.push_back({{"dataset name", std::string(kToyDataset)},
                   {"dataset description",
                    "Chest CT scans stored as small numpy arrays in two balanced classes "
                    "(class0 healthy, class1 pneumonia) for disease diagnosis. Labels are in "
                    "labels.csv."},
                   {"dataset path", "datasets/" + std::string(kToyDataset)}});
  cards.push_back({{"dataset name", std::string(kToySegDataset)},
                   {"dataset description",
                    "Abdominal CT slices with liver masks for organ segmentation; images/ and "
                    "masks/ share file names."},
                   {"dataset path", seg_dir.string()}});
  write_text(ws.root / WorkspaceLayout::datacard_file, cards.dump(4) + "\n");

  const auto examples = ws.root / WorkspaceLayout::index_examples;
  write_json(examples / "diagnosis" / "train.json",
             nlohmann::json::array({{{"image", "class0/example.npy"}, {"label", 0}}}));
  write_json(examples / "diagnosis" / "test.json",
             nlohmann::json::array({{{"image", "class1/example.npy"}, {"label", 1}}}));
  write_json(examples / "diagnosis" / "label_dict.json", {{"class0", 0}, {"class1", 1}});
  write_json(examples / "segmentation" / "train.json",
             nlohmann::json::array({{{"image", "images/a.npy"}, {"mask", "masks/a.npy"}}}));
  write_json(examples / "segmentation" / "test.json",
             nlohmann::json::array({{{"image", "images/b.npy"}, {"mask", "masks/b.npy"}}}));

  write_text(ws.root / WorkspaceLayout::dataloader_examples / "diagnosis" / "dataloader.py",
             kDataloaderExample);
  const auto scripts = ws.root / WorkspaceLayout::training_scripts / "diagnosis";
  write_text(scripts / "train.sh", train_stub_script());
  write_text(scripts / "train.py", kTrainPy);
  fs::create_directories(ws.root / WorkspaceLayout::runs);
  return ws;
}

nlohmann::json call_step(const std::string& tool, nlohmann::json args) {
  return {{"tool_calls", nlohmann::json::array({{{"name", tool}, {"arguments", std::move(args)}}})}};
}

nlohmann::json text_step(const std::string& text) { return {{"text", text}}; }

std::string task_manager_answer(std::string_view dataset) {
  nlohmann::ordered_json pick;
  pick["dataset name"] = std::string(dataset);
  pick["dataset description"] = "Chest CT scans in two balanced classes for disease diagnosis.";
  pick["dataset path"] = "datasets/" + std::string(dataset);
  return pick.dump() +
         "\nTask type: diagnosis.\nPlan: build an 80/20 index of the two classes, write a "
         "dataloader over it and train the diagnosis template.\nReason: it is the only chest "
         "dataset with class labels. <end>";
}

namespace {

nlohmann::json task_manager_steps() {
  return nlohmann::json::array({call_step("read_files", {{"file", "{description_path}"}}),
                                text_step(task_manager_answer())});
}

}  // namespace

nlohmann::json pipeline_behavior(Fault fault) {
  using nlohmann::json;
  json stages;
  stages["task_manager"] = task_manager_steps();

  const std::string index_cmd = std::string("python3 Datapath/make_index.py {dataset_path} Datapath") +
                                (fault == Fault::overlapping_splits ? " overlap" : "");
  stages["data_engineer"] = json::array({
      call_step("preview_dirs", {{"dir", "{dataset_path}"}}),
      call_step("preview_files", {{"file", "{dataset_path}/labels.csv"}}),
      call_step("read_files", {{"file", "{examples_path}/diagnosis/train.json"}}),
      call_step("write_files", {{"file", "Datapath/make_index.py"}, {"content", std::string(kMakeIndexPy)}}),
      call_step("run_script", {{"command", index_cmd}}),
      text_step("Wrote Datapath/train.json, Datapath/test.json and Datapath/label_dict.json "
                "with an 80/20 random split of the two classes. <end>"),
  });

  json architect = json::array({
      call_step("list_files", {{"dir", "Datapath"}}),
      call_step("preview_files", {{"file", "Datapath/train.json"}}),
      call_step("read_files", {{"file", "{template_path}/diagnosis/dataloader.py"}}),
  });
  if (fault == Fault::dataloader_fails) {
    architect.push_back(call_step("write_files", {{"file", "Datapath/dataloader.py"},
                                                  {"content", std::string(kBrokenDataloaderPy)}}));
  } else {
    architect.push_back(call_step("write_files", {{"file", "Datapath/dataloader.py"},
                                                  {"content", std::string(kDataloaderPy)}}));
  }
  architect.push_back(call_step("run_script", {{"command", "python3 Datapath/dataloader.py"}}));
  architect.push_back(text_step("dataloader.py is at {datapath}/dataloader.py; ToyDataset(split) "
                                "yields (image path, label) pairs for train and test. <end>"));
  stages["module_architect"] = architect;

  json trainer = json::array();
  const std::string real = "{train_script_path}/diagnosis/train.sh";
  if (fault == Fault::train_fails_once || fault == Fault::train_always_fails) {
    trainer.push_back(call_step("write_files", {{"file", "train.sh"}, {"content", std::string(kBrokenTrainSh)}}));
    const int runs = fault == Fault::train_fails_once ? 1 : 6;
    for (int i = 0; i < runs; ++i) trainer.push_back(call_step("run_script", {{"command", "sh train.sh"}}));
    if (fault == Fault::train_fails_once) {
      trainer.push_back(call_step("copy_files", {{"src", real}, {"dst", "train.sh"}}));
      trainer.push_back(call_step("run_script", {{"command", "sh train.sh"}}));
    }
  } else {
    trainer.push_back(call_step("copy_files", {{"src", real}, {"dst", "train.sh"}}));
    trainer.push_back(call_step("copy_files", {{"src", "{train_script_path}/diagnosis/train.py"}, {"dst", "train.py"}}));
    trainer.push_back(call_step("read_files", {{"file", "train.sh"}}));
    trainer.push_back(call_step("run_script", {{"command", "sh train.sh"}}));
  }
  trainer.push_back(text_step("Training finished; the model is in Logout/model.bin. <end>"));
  stages["model_trainer"] = trainer;
  return {{"stages", stages}};
}

nlohmann::json gated_behavior(const std::map<std::string, AgentRole>& failing, int samples) {
  using nlohmann::json;
  auto gate = [&](AgentRole role) {
    std::string ids;
    for (const auto& [id, r] : failing) {
      if (r != role) continue;
      if (!ids.empty()) ids += "|";
      ids += id;
    }
    return ids.empty() ? std::string("__none__") : ids;
  };

  const auto paths = toy_sample_paths(samples);
  json train = json::array(), test = json::array();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    json item = {{"image", paths[i]}, {"label", paths[i][5] - '0'}};
    (i % 5 == 4 ? test : train).push_back(item);
  }

  json stages;
  stages["task_manager"] = task_manager_steps();
  stages["data_engineer"] = json::array({
      call_step("write_files", {{"file", "Datapath/train.json"}, {"content", train.dump()}}),
      call_step("write_files", {{"file", "Datapath/test.json"}, {"content", test.dump()}}),
      call_step("write_files", {{"file", "Datapath/label_dict.json"},
                                {"content", json({{"class0", 0}, {"class1", 1}}).dump()}}),
      call_step("write_files",
                {{"file", "Datapath/make_index.sh"},
                 {"content", "case \"$1\" in " + gate(AgentRole::data_engineer) +
                                 ") rm -f Datapath/test.json;; esac\necho indexed\n"}}),
      call_step("run_script", {{"command", "sh Datapath/make_index.sh {run_id}"}}),
      text_step("Index files written to Datapath. <end>"),
  });
  stages["module_architect"] = json::array({
      call_step("write_files", {{"file", "Datapath/dataloader.py"}, {"content", "# loader\n"}}),
      call_step("write_files",
                {{"file", "Datapath/check_dataloader.sh"},
                 {"content", "case \"$1\" in " + gate(AgentRole::module_architect) +
                                 ") echo 'ImportError: no module named loader' >&2; exit 1;; esac\n"
                                 "test -f Datapath/dataloader.py\n"}}),
      call_step("run_script", {{"command", "sh Datapath/check_dataloader.sh {run_id}"}}),
      text_step("dataloader.py is at Datapath/dataloader.py. <end>"),
  });
  stages["model_trainer"] = json::array({
      call_step("copy_files", {{"src", "{train_script_path}/diagnosis/train.sh"}, {"dst", "train.sh"}}),
      call_step("write_files",
                {{"file", "gate.sh"},
                 {"content", "case \"$1\" in " + gate(AgentRole::model_trainer) +
                                 ") echo 'CUDA error: out of memory' >&2; exit 1;; esac\n"}}),
      call_step("run_script", {{"command", "sh gate.sh {run_id} && sh train.sh"}}),
      text_step("Training done. <end>"),
  });
  return {{"stages", stages}};
}

}  // namespace medpipe::fixture

//
// Copyright 2026 The Privex Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "privex/pipeline.h"

#include <fstream>
#include <sstream>

#include "privex/classifier.h"
#include "privex/deep_taylor.h"
#include "privex/error.h"
#include "privex/metrics.h"
#include "privex/pprlvgan.h"
#include "privex/privatize_classic.h"
#include "privex/rng.h"

namespace privex {

namespace fs = std::filesystem;

namespace {

// Stream ids for seeds derived from the run seed.
enum SeedStream : uint64_t {
  kSplitStream = 1,
  kGanStream = 2,
  kIdentityClassifierStream = 3,
  kPathologyClassifierStream = 4,
  kKSameStream = 5,
  kGanSetStream = 6,
};

const std::vector<std::pair<Command, std::string>>& CommandTable() {
  static const std::vector<std::pair<Command, std::string>> table = {
      {Command::kSynth, "synth"},
      {Command::kIngest, "ingest"},
      {Command::kTrainGan, "train-gan"},
      {Command::kTrainClassifier, "train-classifier"},
      {Command::kPrivatize, "privatize"},
      {Command::kEvaluate, "evaluate"},
      {Command::kSaliency, "saliency"},
      {Command::kReport, "report"},
      {Command::kPipeline, "pipeline"},
  };
  return table;
}

void RequireFile(const fs::path& path) {
  if (!fs::exists(path)) {
    throw MissingArtifactError("missing artifact: " + path.string());
  }
}

struct SplitData {
  Dataset train, val, test;
};

SplitData LoadSplit(const ArtifactPaths& paths) {
  SplitData s;
  for (const char* part : {"train", "val", "test"}) {
    RequireFile(paths.split_dir / (std::string(part) + ".csv"));
  }
  s.train = LoadManifest(paths.split_dir / "train.csv");
  s.val = LoadManifest(paths.split_dir / "val.csv");
  s.test = LoadManifest(paths.split_dir / "test.csv");
  return s;
}

ClassifierState LoadClassifierArtifact(const fs::path& prefix) {
  RequireFile(prefix.string() + ".meta");
  RequireFile(prefix.string() + ".psck");
  return LoadClassifier(prefix);
}

void WriteText(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct GanSetSpec {
  std::string name;
  ReplacementPolicy policy;
  bool averaged;
};

std::vector<GanSetSpec> GanSets(const RunConfig& config) {
  using Kind = ReplacementPolicy::Kind;
  const std::string avg = "pprlvgan_avg" + std::to_string(config.averaging_n) + "_";
  return {
      {"pprlvgan_random", {Kind::kRandom, 0}, false},
      {"pprlvgan_same_pathology", {Kind::kSamePathology, 0}, false},
      {"pprlvgan_different_pathology", {Kind::kDifferentPathology, 0}, false},
      {avg + "random", {Kind::kRandom, 0}, true},
      {avg + "same_pathology", {Kind::kSamePathology, 0}, true},
  };
}

std::vector<fs::path> Synth(const RunConfig& config, const ArtifactPaths& paths,
                            std::ostream& log) {
  if (config.manifest) {
    throw ConfigError("synth: data.manifest is set; the dataset source is a manifest");
  }
  const Dataset data = Synthesize(config.synth, config.seed);
  WriteManifest(data, paths.dataset_dir);
  log << "synth: " << data.size() << " images, " << data.n_identities()
      << " identities -> " << paths.dataset_dir.string() << "\n";
  return {paths.dataset_dir / "manifest.csv"};
}

std::vector<fs::path> Ingest(const RunConfig& config, const ArtifactPaths& paths,
                             std::ostream& log) {
  const fs::path source =
      config.manifest ? *config.manifest : paths.dataset_dir / "manifest.csv";
  RequireFile(source);
  const Dataset raw = LoadManifest(source);
  std::vector<ImageSample> processed;
  processed.reserve(raw.size());
  for (const ImageSample& s : raw.samples()) {
    processed.push_back(Preprocess(s, config.preprocess));
  }
  const DatasetSplit split = Split(Dataset(std::move(processed)), config.split,
                                   DeriveSeed(config.seed, kSplitStream));
  WriteManifest(split.train, paths.split_dir, "train.csv");
  WriteManifest(split.val, paths.split_dir, "val.csv");
  WriteManifest(split.test, paths.split_dir, "test.csv");
  log << "ingest: train " << split.train.size() << ", val " << split.val.size()
      << ", test " << split.test.size() << " -> " << paths.split_dir.string() << "\n";
  return {paths.split_dir / "train.csv", paths.split_dir / "val.csv",
          paths.split_dir / "test.csv"};
}

std::vector<fs::path> TrainGanStage(const RunConfig& config, const ArtifactPaths& paths,
                                    std::ostream& log) {
  const SplitData data = LoadSplit(paths);
  TrainingHyperparams hp = config.gan;
  hp.seed = DeriveSeed(config.seed, kGanStream);
  const GanTrainingResult result = TrainGan(data.train, data.val, hp);
  for (const EpochStats& e : result.history) {
    log << "train-gan: epoch " << e.epoch << " D " << e.discriminator_objective << " G "
        << e.generator_loss << " val real/fake acc " << e.val_real_fake_accuracy << "\n";
  }
  fs::create_directories(paths.gan_prefix.parent_path());
  SaveGan(paths.gan_prefix, result.generator, result.discriminator, hp.seed);
  return {paths.gan_prefix.string() + ".psck", paths.gan_prefix.string() + ".meta"};
}

std::vector<fs::path> TrainClassifierStage(const RunConfig& config,
                                           const ArtifactPaths& paths, std::ostream& log) {
  const SplitData data = LoadSplit(paths);
  std::vector<fs::path> out;
  fs::create_directories(paths.identity_classifier_prefix.parent_path());
  const std::pair<ClassifierTarget, fs::path> jobs[] = {
      {ClassifierTarget::kIdentity, paths.identity_classifier_prefix},
      {ClassifierTarget::kPathology, paths.pathology_classifier_prefix},
  };
  for (const auto& [target, prefix] : jobs) {
    const uint64_t seed = DeriveSeed(config.seed, target == ClassifierTarget::kIdentity
                                                      ? kIdentityClassifierStream
                                                      : kPathologyClassifierStream);
    const ClassifierState model =
        TrainClassifier(data.train, data.val, target, config.classifier, seed);
    SaveClassifier(prefix, model);
    log << "train-classifier: " << TargetName(target) << " val accuracy "
        << model.val_accuracy << " (epoch " << model.best_epoch << ")\n";
    out.push_back(prefix.string() + ".psck");
    out.push_back(prefix.string() + ".meta");
  }
  return out;
}

std::vector<fs::path> Privatize(const RunConfig& config, const ArtifactPaths& paths,
                                std::ostream& log) {
  const SplitData data = LoadSplit(paths);
  RequireFile(paths.gan_prefix.string() + ".meta");
  RequireFile(paths.gan_prefix.string() + ".psck");
  const LoadedGan gan = LoadGan(paths.gan_prefix);
  std::vector<fs::path> out;
  auto emit = [&](const std::string& name, const std::vector<PrivatizedImage>& set) {
    const fs::path dir = paths.privatized_dir / name;
    WritePrivatizedSet(set, dir);
    log << "privatize: " << name << " (" << set.size() << " images)\n";
    out.push_back(dir / "manifest.csv");
  };
  for (int k : config.blur_kernel_sizes) {
    std::vector<PrivatizedImage> set;
    for (const ImageSample& s : data.test.samples()) {
      set.push_back(Blur(s, BlurConfig{k, config.blur_sigma}));
    }
    emit("blur_k" + std::to_string(k), set);
  }
  for (int k : config.ksame_k_values) {
    emit("ksame_k" + std::to_string(k),
         KSameSelect(data.test, KSameConfig{k},
                     DeriveSeed(config.seed, kKSameStream, static_cast<uint64_t>(k))));
  }
  const auto sets = GanSets(config);
  for (size_t i = 0; i < sets.size(); ++i) {
    const uint64_t seed = DeriveSeed(config.seed, kGanSetStream, i);
    if (sets[i].averaged) {
      emit(sets[i].name, AveragedPrivatizeSet(gan.generator, data.test, config.averaging_n,
                                              sets[i].policy, data.train, seed));
    } else {
      emit(sets[i].name,
           PrivatizeSet(gan.generator, data.test, sets[i].policy, data.train, seed));
    }
  }
  return out;
}

std::vector<fs::path> Evaluate(const RunConfig& config, const ArtifactPaths& paths,
                               std::ostream& log) {
  const auto rows = EvaluateArtifacts(config, log);
  WriteText(paths.evaluation_csv, BuildReport(rows).csv);
  log << "evaluate: " << rows.size() << " rows -> " << paths.evaluation_csv.string() << "\n";
  return {paths.evaluation_csv};
}

std::vector<fs::path> Saliency(const RunConfig& config, const ArtifactPaths& paths,
                               std::ostream& log) {
  const SplitData data = LoadSplit(paths);
  const ClassifierState model = LoadClassifierArtifact(paths.pathology_classifier_prefix);
  std::vector<fs::path> out;
  const size_t count = std::min(data.test.size(), static_cast<size_t>(config.saliency_count));
  for (size_t i = 0; i < count; ++i) {
    const ImageSample& s = data.test[i];
    const RelevanceMap map = DeepTaylor(model, s.pixels);
    const fs::path pgm = paths.saliency_dir / (s.id + ".pgm");
    fs::create_directories(pgm.parent_path());
    WriteRelevance(map, pgm);
    log << "saliency: " << s.id << " class " << model.label_space[map.predicted_class]
        << " score " << map.output_score << "\n";
    out.push_back(pgm);
  }
  return out;
}

std::vector<fs::path> Report(const ArtifactPaths& paths, std::ostream& log) {
  std::vector<EvaluationRow> rows;
  if (fs::exists(paths.evaluation_csv)) {
    rows = ParseReportCsv(ReadText(paths.evaluation_csv));
  } else {
    log << "report: no evaluation rows at " << paths.evaluation_csv.string() << "\n";
  }
  WriteText(paths.report_csv, BuildReport(rows).csv);
  log << "report: " << rows.size() << " rows -> " << paths.report_csv.string() << "\n";
  return {paths.report_csv};
}

}  // namespace

std::string CommandName(Command command) {
  for (const auto& [c, name] : CommandTable()) {
    if (c == command) return name;
  }
  return "";
}

Command ParseCommand(const std::string& name) {
  for (const auto& [c, n] : CommandTable()) {
    if (n == name) return c;
  }
  throw ConfigError("unknown command '" + name + "'");
}

const std::vector<Command>& AllCommands() {
  static const std::vector<Command> all = [] {
    std::vector<Command> v;
    for (const auto& [c, n] : CommandTable()) v.push_back(c);
    return v;
  }();
  return all;
}

ArtifactPaths::ArtifactPaths(const RunConfig& config) {
  const fs::path& root = config.output_dir;
  dataset_dir = root / ("dataset-" + config.DataHash());
  split_dir = root / ("split-" + config.DataHash());
  gan_prefix = root / ("gan-" + config.GanHash());
  identity_classifier_prefix = root / ("classifier-identity-" + config.ClassifierHash());
  pathology_classifier_prefix = root / ("classifier-pathology-" + config.ClassifierHash());
  privatized_dir = root / ("privatized-" + config.PrivatizeHash());
  evaluation_csv = root / ("evaluation-" + config.EvaluateHash() + ".csv");
  saliency_dir = root / ("saliency-" + config.ClassifierHash());
  report_csv = root / ("report-" + config.EvaluateHash() + ".csv");
}

std::vector<std::string> PrivatizedSetNames(const RunConfig& config) {
  std::vector<std::string> names;
  for (int k : config.blur_kernel_sizes) names.push_back("blur_k" + std::to_string(k));
  for (int k : config.ksame_k_values) names.push_back("ksame_k" + std::to_string(k));
  for (const GanSetSpec& s : GanSets(config)) names.push_back(s.name);
  return names;
}

std::vector<EvaluationRow> EvaluateArtifacts(const RunConfig& config, std::ostream& log) {
  const ArtifactPaths paths(config);
  const SplitData data = LoadSplit(paths);
  const ClassifierState id_model = LoadClassifierArtifact(paths.identity_classifier_prefix);
  const ClassifierState task_model = LoadClassifierArtifact(paths.pathology_classifier_prefix);

  std::vector<EvaluationRow> rows;
  {
    std::vector<const Image*> images;
    std::vector<int> pathology;
    for (const ImageSample& s : data.test.samples()) {
      images.push_back(&s.pixels);
      pathology.push_back(s.pathology);
    }
    const auto task_pred = PredictLabels(task_model, images);
    EvaluationRow base;
    base.experiment = "baseline";
    base.dataset = "test";
    base.identity_acc = Accuracy(id_model, data.test);
    base.task_acc = AccuracyOf(task_pred, pathology);
    base.task_f1 = F1(task_pred, pathology);
    rows.push_back(base);
  }
  for (const std::string& name : PrivatizedSetNames(config)) {
    const fs::path dir = paths.privatized_dir / name;
    RequireFile(dir / "manifest.csv");
    const auto set = ReadPrivatizedSet(dir, data.test);
    const auto id_pred = PredictPrivatized(id_model, set);
    EvaluationRow row;
    row.experiment = name;
    row.dataset = "test";
    std::vector<int> identity;
    for (const PrivatizedImage& img : set) identity.push_back(img.original_identity.value());
    row.identity_acc = AccuracyOf(id_pred, identity);
    const bool has_replacement = !set.empty() && set.front().replacement_identity.has_value();
    if (has_replacement) row.replacement_acc = ReplacementIdentityAccuracy(id_pred, set);
    row.source_leakage_acc = SourceLeakageAccuracy(id_pred, set);
    row.task_acc = PrivatizedAccuracy(task_model, set);
    row.task_f1 = PrivatizedF1(task_model, set);
    // A leak of the original identity is always a source leak.
    if (row.source_leakage_acc < row.identity_acc) {
      throw NumericalError("evaluate: source leakage below identity accuracy for " + name);
    }
    log << "evaluate: " << name << " identity " << row.identity_acc << " task "
        << row.task_acc << "\n";
    rows.push_back(row);
  }
  return rows;
}

std::vector<fs::path> RunCommand(Command command, const RunConfig& config,
                                 std::ostream& log) {
  config.Validate();
  const ArtifactPaths paths(config);
  fs::create_directories(config.output_dir);
  switch (command) {
    case Command::kSynth:
      return Synth(config, paths, log);
    case Command::kIngest:
      return Ingest(config, paths, log);
    case Command::kTrainGan:
      return TrainGanStage(config, paths, log);
    case Command::kTrainClassifier:
      return TrainClassifierStage(config, paths, log);
    case Command::kPrivatize:
      return Privatize(config, paths, log);
    case Command::kEvaluate:
      return Evaluate(config, paths, log);
    case Command::kSaliency:
      return Saliency(config, paths, log);
    case Command::kReport:
      return Report(paths, log);
    case Command::kPipeline: {
      std::vector<fs::path> all;
      std::vector<Command> stages = {Command::kIngest, Command::kTrainClassifier,
                                     Command::kTrainGan, Command::kPrivatize,
                                     Command::kEvaluate, Command::kSaliency,
                                     Command::kReport};
      if (!config.manifest) stages.insert(stages.begin(), Command::kSynth);
      for (Command c : stages) {
        const auto produced = RunCommand(c, config, log);
        all.insert(all.end(), produced.begin(), produced.end());
      }
      return all;
    }
  }
  return {};
}

}  // namespace privex

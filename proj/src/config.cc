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

#include "privex/config.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "privex/error.h"

namespace privex {

namespace {

std::string Trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(Trim(item));
  if (!text.empty() && text.back() == ',') out.emplace_back();
  return out;
}

long long ToInt(const std::string& s) {
  size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("not an integer");
  return v;
}

double ToDouble(const std::string& s) {
  size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("not a number");
  return v;
}

bool ToBool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("not a boolean");
}

uint64_t ToSeed(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("not an unsigned integer");
  }
  return std::stoull(s);  // out_of_range past 2^64 - 1
}

std::vector<int> ToIntList(const std::string& s) {
  std::vector<int> out;
  for (const std::string& item : SplitList(s)) out.push_back(static_cast<int>(ToInt(item)));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string Bool(bool v) { return v ? "true" : "false"; }

std::string IntList(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PRIVEX_INT_FIELD(sec, name, member)                                       \
  Field {                                                                         \
    sec, name, [](RunConfig& c, const std::string& v) { c.member = static_cast<int>(ToInt(v)); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }               \
  }
#define PRIVEX_DOUBLE_FIELD(sec, name, member)                                    \
  Field {                                                                         \
    sec, name, [](RunConfig& c, const std::string& v) { c.member = ToDouble(v); }, \
        [](const RunConfig& c) { return Num(c.member); }                          \
  }
#define PRIVEX_BOOL_FIELD(sec, name, member)                                      \
  Field {                                                                         \
    sec, name, [](RunConfig& c, const std::string& v) { c.member = ToBool(v); },  \
        [](const RunConfig& c) { return Bool(c.member); }                         \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      {"run", "seed",
       [](RunConfig& c, const std::string& v) { c.seed = ToSeed(v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"run", "output_dir",
       [](RunConfig& c, const std::string& v) { c.output_dir = v; },
       [](const RunConfig& c) { return c.output_dir.string(); }},
      {"data", "manifest",
       [](RunConfig& c, const std::string& v) { c.manifest = v; },
       [](const RunConfig& c) { return c.manifest ? c.manifest->string() : ""; }},
      PRIVEX_INT_FIELD("synth", "n_identities", synth.n_identities),
      PRIVEX_INT_FIELD("synth", "images_per_identity", synth.images_per_identity),
      PRIVEX_INT_FIELD("synth", "resolution", synth.resolution),
      PRIVEX_DOUBLE_FIELD("synth", "pathology_fraction", synth.pathology_fraction),
      PRIVEX_DOUBLE_FIELD("synth", "noise_std", synth.noise_std),
      {"synth", "lesion_region",
       [](RunConfig& c, const std::string& v) {
         const auto parts = SplitList(v);
         if (parts.size() != 4) throw std::invalid_argument("expected 4 numbers");
         c.synth.lesion_region = {ToDouble(parts[0]), ToDouble(parts[1]),
                                  ToDouble(parts[2]), ToDouble(parts[3])};
       },
       [](const RunConfig& c) {
         const auto& r = c.synth.lesion_region;
         return Num(r.top) + "," + Num(r.left) + "," + Num(r.bottom) + "," + Num(r.right);
       }},
      {"preprocess", "crop",
       [](RunConfig& c, const std::string& v) {
         const auto p = ToIntList(v);
         if (p.size() != 4) throw std::invalid_argument("expected row,col,height,width");
         c.preprocess.crop_rect = Rect{p[0], p[1], p[2], p[3]};
       },
       [](const RunConfig& c) {
         if (!c.preprocess.crop_rect) return std::string();
         const Rect& r = *c.preprocess.crop_rect;
         return IntList({r.row, r.col, r.height, r.width});
       }},
      PRIVEX_BOOL_FIELD("preprocess", "flip_right_eye", preprocess.flip_right_eye),
      PRIVEX_BOOL_FIELD("preprocess", "center_iris", preprocess.center_iris),
      {"preprocess", "target_resolution",
       [](RunConfig& c, const std::string& v) {
         c.preprocess.target_resolution = static_cast<int>(ToInt(v));
         c.gan.arch.resolution = c.preprocess.target_resolution;
       },
       [](const RunConfig& c) { return std::to_string(c.preprocess.target_resolution); }},
      PRIVEX_DOUBLE_FIELD("split", "train", split.train),
      PRIVEX_DOUBLE_FIELD("split", "val", split.val),
      PRIVEX_DOUBLE_FIELD("split", "test", split.test),
      {"blur", "kernel_sizes",
       [](RunConfig& c, const std::string& v) { c.blur_kernel_sizes = ToIntList(v); },
       [](const RunConfig& c) { return IntList(c.blur_kernel_sizes); }},
      {"blur", "sigma",
       [](RunConfig& c, const std::string& v) {
         if (v == "auto") {
           c.blur_sigma.reset();
         } else {
           c.blur_sigma = ToDouble(v);
         }
       },
       [](const RunConfig& c) { return c.blur_sigma ? Num(*c.blur_sigma) : "auto"; }},
      {"ksame", "k_values",
       [](RunConfig& c, const std::string& v) { c.ksame_k_values = ToIntList(v); },
       [](const RunConfig& c) { return IntList(c.ksame_k_values); }},
      PRIVEX_DOUBLE_FIELD("pprlvgan", "lambda_g1", gan.lambda_g1),
      PRIVEX_DOUBLE_FIELD("pprlvgan", "lambda_g2", gan.lambda_g2),
      PRIVEX_DOUBLE_FIELD("pprlvgan", "lambda_g3", gan.lambda_g3),
      PRIVEX_DOUBLE_FIELD("pprlvgan", "lambda_g4", gan.lambda_g4),
      PRIVEX_DOUBLE_FIELD("pprlvgan", "lambda_d1", gan.lambda_d1),
      PRIVEX_DOUBLE_FIELD("pprlvgan", "lambda_d2", gan.lambda_d2),
      PRIVEX_DOUBLE_FIELD("pprlvgan", "lambda_d3", gan.lambda_d3),
      PRIVEX_INT_FIELD("pprlvgan", "latent_dim", gan.arch.latent_dim),
      PRIVEX_INT_FIELD("pprlvgan", "batch_size", gan.batch_size),
      PRIVEX_INT_FIELD("pprlvgan", "epochs", gan.epochs),
      {"pprlvgan", "learning_rate",
       [](RunConfig& c, const std::string& v) {
         c.gan.generator_optimizer.learning_rate = ToDouble(v);
         c.gan.discriminator_optimizer.learning_rate = ToDouble(v);
       },
       [](const RunConfig& c) { return Num(c.gan.generator_optimizer.learning_rate); }},
      {"pprlvgan", "beta1",
       [](RunConfig& c, const std::string& v) {
         c.gan.generator_optimizer.beta1 = ToDouble(v);
         c.gan.discriminator_optimizer.beta1 = ToDouble(v);
       },
       [](const RunConfig& c) { return Num(c.gan.generator_optimizer.beta1); }},
      {"pprlvgan", "beta2",
       [](RunConfig& c, const std::string& v) {
         c.gan.generator_optimizer.beta2 = ToDouble(v);
         c.gan.discriminator_optimizer.beta2 = ToDouble(v);
       },
       [](const RunConfig& c) { return Num(c.gan.generator_optimizer.beta2); }},
      PRIVEX_BOOL_FIELD("pprlvgan", "non_saturating", gan.non_saturating),
      PRIVEX_INT_FIELD("pprlvgan", "averaging_n", averaging_n),
      PRIVEX_INT_FIELD("classifier", "epochs", classifier.epochs),
      PRIVEX_INT_FIELD("classifier", "batch_size", classifier.batch_size),
      {"classifier", "learning_rate",
       [](RunConfig& c, const std::string& v) {
         c.classifier.optimizer.learning_rate = ToDouble(v);
       },
       [](const RunConfig& c) { return Num(c.classifier.optimizer.learning_rate); }},
      PRIVEX_INT_FIELD("saliency", "count", saliency_count),
  };
  return fields;
}

#undef PRIVEX_INT_FIELD
#undef PRIVEX_DOUBLE_FIELD
#undef PRIVEX_BOOL_FIELD

std::string Listing(const RunConfig& config, const std::set<std::string>& sections,
                    const std::set<std::string>& exclude = {}) {
  std::string out;
  for (const Field& f : Fields()) {
    const std::string name = f.section + "." + f.key;
    if (!sections.count(f.section) || exclude.count(name)) continue;
    out += name + "=" + f.get(config) + "\n";
  }
  return out;
}

const std::set<std::string> kDataSections = {"run", "data", "synth", "preprocess", "split"};
const std::set<std::string> kNotHashed = {"run.output_dir"};

std::set<std::string> With(std::set<std::string> base, std::initializer_list<const char*> more) {
  for (const char* s : more) base.insert(s);
  return base;
}

}  // namespace

RunConfig::RunConfig() {
  synth.n_identities = 24;
  synth.pathology_fraction = 0.5;
  classifier.epochs = 20;
  gan.arch.resolution = preprocess.target_resolution;
}

void RunConfig::Validate() const {
  try {
    if (!manifest) synth.Validate();
    if (preprocess.target_resolution < 8 || preprocess.target_resolution % 8 != 0) {
      throw std::invalid_argument("preprocess.target_resolution must be a positive multiple of 8");
    }
    if (preprocess.crop_rect) {
      const Rect& r = *preprocess.crop_rect;
      if (r.row < 0 || r.col < 0 || r.height < 1 || r.width < 1) {
        throw std::invalid_argument("preprocess.crop must have non-negative origin and positive size");
      }
    }
    if (!(split.train > 0 && split.val > 0 && split.test > 0) ||
        std::abs(split.train + split.val + split.test - 1.0) > 1e-9) {
      throw std::invalid_argument("split ratios must be positive and sum to 1");
    }
    for (int k : blur_kernel_sizes) {
      if (k < 1 || k % 2 == 0) throw std::invalid_argument("blur.kernel_sizes must be odd and >= 1");
    }
    if (blur_sigma && !(*blur_sigma > 0)) throw std::invalid_argument("blur.sigma must be > 0");
    for (int k : ksame_k_values) {
      if (k < 2) throw std::invalid_argument("ksame.k_values must be >= 2");
    }
    // Each value names its own privatized set.
    for (const auto* list : {&blur_kernel_sizes, &ksame_k_values}) {
      if (std::set<int>(list->begin(), list->end()).size() != list->size()) {
        throw std::invalid_argument(std::string(list == &blur_kernel_sizes ? "blur.kernel_sizes"
                                                                           : "ksame.k_values") +
                                    " contains duplicates");
      }
    }
    if (averaging_n < 2) throw std::invalid_argument("pprlvgan.averaging_n must be >= 2");
    if (saliency_count < 0) throw std::invalid_argument("saliency.count must be >= 0");
    gan.Validate();
    classifier.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string CanonicalConfig(const RunConfig& config) {
  std::set<std::string> all;
  for (const Field& f : Fields()) all.insert(f.section);
  return Listing(config, all);
}

std::string HashText(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::DataHash() const {
  return HashText(Listing(*this, kDataSections, kNotHashed));
}

std::string RunConfig::GanHash() const {
  return HashText(Listing(*this, With(kDataSections, {"pprlvgan"}),
                          With(kNotHashed, {"pprlvgan.averaging_n"})));
}

std::string RunConfig::ClassifierHash() const {
  return HashText(Listing(*this, With(kDataSections, {"classifier"}), kNotHashed));
}

std::string RunConfig::PrivatizeHash() const {
  return HashText(
      Listing(*this, With(kDataSections, {"pprlvgan", "blur", "ksame"}), kNotHashed));
}

std::string RunConfig::EvaluateHash() const {
  return HashText(Listing(
      *this, With(kDataSections, {"pprlvgan", "blur", "ksame", "classifier"}), kNotHashed));
}

RunConfig ParseConfig(const std::string& text) {
  RunConfig config;
  std::map<std::string, const Field*> by_name;
  std::set<std::string> sections;
  for (const Field& f : Fields()) {
    by_name[f.section + "." + f.key] = &f;
    sections.insert(f.section);
  }
  std::set<std::string> seen;
  bool any_synth = false;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const size_t hash = raw.find('#');
    const std::string line = Trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = Trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside any section");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    const std::string name = section + "." + key;
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ConfigError(where + "unknown key '" + name + "'");
    if (!seen.insert(name).second) throw ConfigError(where + "duplicate key '" + name + "'");
    try {
      it->second->set(config, value);
    } catch (const std::exception&) {
      throw ConfigError(where + "invalid value '" + value + "' for key '" + name + "'");
    }
    any_synth = any_synth || section == "synth";
  }
  if (config.manifest && any_synth) {
    throw ConfigError("config sets both data.manifest and [synth] keys; choose one dataset source");
  }
  config.Validate();
  return config;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config file not found: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str());
}

void ApplyEnvironment(RunConfig& config) {
  if (const char* dir = std::getenv("PRIVEX_OUTPUT_DIR"); dir && *dir) {
    config.output_dir = dir;
  }
  if (const char* seed = std::getenv("PRIVEX_SEED"); seed && *seed) {
    try {
      config.seed = ToSeed(seed);
    } catch (const std::exception&) {
      throw ConfigError(std::string("PRIVEX_SEED is not an unsigned integer: '") + seed + "'");
    }
  }
}

}  // namespace privex

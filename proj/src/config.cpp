#include "sentcx/config.hpp"

#include <nlohmann/json.hpp>
#include <set>
#include <unordered_set>

#include "sentcx/errors.hpp"
#include "sentcx/io.hpp"

namespace sentcx {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(where) + "." + key + " has the wrong type");
  }
}

std::size_t get_count(const json& obj, const char* key, std::size_t fallback, std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
    throw ValidationError(std::string(where) + "." + key + " must be a non-negative integer");
  }
  return it->get<std::size_t>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

HyperParams parse_hyper(const json& obj, HyperParams h, std::string_view where) {
  check_keys(obj, where,
             {"learning_rate", "warmup_fraction", "batch_size", "max_epochs", "early_stopping", "holdout_fraction",
              "ridge_lambda"});
  h.learning_rate = get_or(obj, "learning_rate", h.learning_rate, where);
  h.warmup_fraction = get_or(obj, "warmup_fraction", h.warmup_fraction, where);
  h.batch_size = get_count(obj, "batch_size", h.batch_size, where);
  h.max_epochs = get_count(obj, "max_epochs", h.max_epochs, where);
  h.early_stopping = get_or(obj, "early_stopping", h.early_stopping, where);
  h.early_stopping_holdout_fraction = get_or(obj, "holdout_fraction", h.early_stopping_holdout_fraction, where);
  h.ridge_lambda = get_or(obj, "ridge_lambda", h.ridge_lambda, where);
  return h;
}

json hyper_json(const HyperParams& h) {
  return {{"learning_rate", h.learning_rate},   {"warmup_fraction", h.warmup_fraction},
          {"batch_size", h.batch_size},         {"max_epochs", h.max_epochs},
          {"early_stopping", h.early_stopping}, {"holdout_fraction", h.early_stopping_holdout_fraction},
          {"ridge_lambda", h.ridge_lambda}};
}

json archetypes_json(const std::vector<Archetype>& archetypes) {
  json out = json::array();
  for (const auto& a : archetypes) {
    json surface = json::array();
    for (auto f : a.features.surface) surface.push_back(to_string(f));
    out.push_back({{"hashed_dim", a.features.hashed_dim},
                   {"ngram_min", a.features.ngram_min},
                   {"ngram_max", a.features.ngram_max},
                   {"max_tokens", a.features.max_tokens},
                   {"batch_size", a.batch_size},
                   {"surface", surface}});
  }
  return out;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "config",
             {"output_dir", "corpora", "labeled", "archetypes", "retrieval", "hyper", "seeds", "cv", "setting",
              "flags"});
  RunConfig c;
  c.source_text = std::string(json_text);
  c.output_dir = resolve(base_dir, get_or<std::string>(doc, "output_dir", "run", "config"));

  if (!doc.contains("corpora") || !doc["corpora"].is_array()) throw ValidationError("config.corpora must be an array");
  for (const auto& entry : doc["corpora"]) {
    check_keys(entry, "corpora[]", {"path", "source", "format"});
    if (!entry.contains("path")) throw ValidationError("corpora[] entry needs a path");
    CorpusSpec spec;
    spec.path = resolve(base_dir, get_or<std::string>(entry, "path", "", "corpora[]"));
    spec.source = parse_source(get_or<std::string>(entry, "source", "other", "corpora[]"));
    spec.format = parse_corpus_format(get_or<std::string>(entry, "format", "plain-lines", "corpora[]"));
    c.corpora.push_back(std::move(spec));
  }

  if (!doc.contains("labeled")) throw ValidationError("config.labeled is required");
  const json& labeled = doc["labeled"];
  check_keys(labeled, "labeled", {"train", "test", "default_rating_std"});
  if (!labeled.contains("train")) throw ValidationError("config.labeled.train is required");
  c.labeled_train = resolve(base_dir, get_or<std::string>(labeled, "train", "", "labeled"));
  if (labeled.contains("test")) c.labeled_test = resolve(base_dir, get_or<std::string>(labeled, "test", "", "labeled"));
  c.default_rating_std = get_or(labeled, "default_rating_std", c.default_rating_std, "labeled");

  if (doc.contains("archetypes")) {
    if (!doc["archetypes"].is_array()) throw ValidationError("config.archetypes must be an array");
    c.archetypes.clear();
    int id = 0;
    for (const auto& entry : doc["archetypes"]) {
      check_keys(entry, "archetypes[]", {"hashed_dim", "ngram_min", "ngram_max", "max_tokens", "batch_size", "surface"});
      Archetype a;
      a.id = id++;
      a.features.hashed_dim = get_count(entry, "hashed_dim", a.features.hashed_dim, "archetypes[]");
      a.features.ngram_min = get_count(entry, "ngram_min", a.features.ngram_min, "archetypes[]");
      a.features.ngram_max = get_count(entry, "ngram_max", a.features.ngram_max, "archetypes[]");
      a.features.max_tokens = get_count(entry, "max_tokens", a.features.max_tokens, "archetypes[]");
      a.batch_size = get_count(entry, "batch_size", a.batch_size, "archetypes[]");
      if (entry.contains("surface")) {
        a.features.surface.clear();
        for (const auto& f : entry["surface"]) {
          if (!f.is_string()) throw ValidationError("archetypes[].surface entries must be strings");
          a.features.surface.push_back(parse_surface_feature(f.get<std::string>()));
        }
      }
      c.archetypes.push_back(std::move(a));
    }
  }

  if (doc.contains("retrieval")) {
    check_keys(doc["retrieval"], "retrieval", {"k"});
    c.k = get_count(doc["retrieval"], "k", c.k, "retrieval");
  }
  if (doc.contains("hyper")) {
    const json& h = doc["hyper"];
    check_keys(h, "hyper", {"baseline_lambda", "pseudo", "fine_tune"});
    c.baseline_lambda = get_or(h, "baseline_lambda", c.baseline_lambda, "hyper");
    if (h.contains("pseudo")) c.pseudo_hyper = parse_hyper(h["pseudo"], c.pseudo_hyper, "hyper.pseudo");
    if (h.contains("fine_tune")) c.fine_tune_hyper = parse_hyper(h["fine_tune"], c.fine_tune_hyper, "hyper.fine_tune");
  }
  if (doc.contains("seeds")) {
    if (!doc["seeds"].is_array()) throw ValidationError("config.seeds must be an array");
    c.seeds.clear();
    for (const auto& s : doc["seeds"]) {
      if (!s.is_number_integer() || s.get<std::int64_t>() <= 0) throw ValidationError("seeds must be positive integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (doc.contains("cv")) {
    check_keys(doc["cv"], "cv", {"n_folds", "fold_seed"});
    c.n_folds = get_count(doc["cv"], "n_folds", c.n_folds, "cv");
    c.fold_seed = get_count(doc["cv"], "fold_seed", c.fold_seed, "cv");
  }
  if (doc.contains("setting")) c.setting = parse_setting(get_or<std::string>(doc, "setting", "", "config"));
  if (doc.contains("flags")) {
    const json& f = doc["flags"];
    check_keys(f, "flags", {"exclude_labeled", "shared_pseudo_labels", "stacker_columns"});
    c.exclude_labeled = get_or(f, "exclude_labeled", c.exclude_labeled, "flags");
    c.shared_pseudo_labels = get_or(f, "shared_pseudo_labels", c.shared_pseudo_labels, "flags");
    if (f.contains("stacker_columns")) {
      c.stacker_columns = parse_stacker_columns(get_or<std::string>(f, "stacker_columns", "", "flags"));
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  const std::string text = io::read_file(path);
  RunConfig c = parse(text, path.parent_path().empty() ? fs::path(".") : path.parent_path());
  c.check_paths();
  return c;
}

void RunConfig::validate() const {
  if (corpora.empty()) throw ValidationError("config needs at least one corpus");
  if (!(default_rating_std >= 0.0)) throw ValidationError("labeled.default_rating_std must be >= 0");
  if (archetypes.empty()) throw ValidationError("config needs at least one archetype");
  check_archetype_ids(archetypes);
  if (k == 0) throw ValidationError("retrieval.k must be positive");
  if (!(baseline_lambda > 0.0)) throw ValidationError("hyper.baseline_lambda must be positive");
  pseudo_hyper.validate();
  fine_tune_hyper.validate();
  if (seeds.empty()) throw ValidationError("config needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ValidationError("seeds must be distinct");
  }
  if (n_folds < 2) throw ValidationError("cv.n_folds must be at least 2");
}

void RunConfig::check_paths() const {
  auto need = [](const fs::path& p, std::string_view what) {
    if (!fs::is_regular_file(p)) throw ValidationError(std::string(what) + " not found: " + p.string());
  };
  for (const auto& c : corpora) need(c.path, "corpus file");
  need(labeled_train, "labeled training set");
  if (labeled_test) need(*labeled_test, "labeled test set");
}

std::string RunConfig::section(std::string_view stage) const {
  json corpora_json = json::array();
  for (const auto& c : corpora) {
    corpora_json.push_back({{"path", c.path.string()}, {"source", to_string(c.source)}, {"format", to_string(c.format)}});
  }
  json s = json::object();
  auto training = [&] {
    s["default_rating_std"] = default_rating_std;
    s["baseline_lambda"] = baseline_lambda;
    s["k"] = k;
    s["exclude_labeled"] = exclude_labeled;
    s["seeds"] = seeds;
    s["pseudo"] = hyper_json(pseudo_hyper);
    s["fine_tune"] = hyper_json(fine_tune_hyper);
    s["stacker_columns"] = to_string(stacker_columns);
  };
  if (stage == "ingest") {
    s["corpora"] = corpora_json;
  } else if (stage == "featurize") {
    s["archetypes"] = archetypes_json(archetypes);
  } else if (stage == "index") {
  } else if (stage == "train-baseline") {
    s["default_rating_std"] = default_rating_std;
    s["baseline_lambda"] = baseline_lambda;
  } else if (stage == "pseudolabel") {
    s["default_rating_std"] = default_rating_std;
    s["k"] = k;
    s["exclude_labeled"] = exclude_labeled;
  } else if (stage == "train-ensemble") {
    training();
    s["fold_seed"] = fold_seed;
    s["n_folds"] = n_folds;
  } else if (stage == "evaluate") {
    training();
    s["fold_seed"] = fold_seed;
    s["n_folds"] = n_folds;
    s["setting"] = to_string(setting);
    s["shared_pseudo_labels"] = shared_pseudo_labels;
  } else if (stage == "predict") {
    s["setting"] = to_string(setting);
  } else {
    throw ValidationError("unknown stage '" + std::string(stage) + "'");
  }
  return s.dump();
}

}  // namespace sentcx

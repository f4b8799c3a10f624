#include "sentcx/commands.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fmt/format.h>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "sentcx/config.hpp"
#include "sentcx/corpus.hpp"
#include "sentcx/digest.hpp"
#include "sentcx/ensemble.hpp"
#include "sentcx/errors.hpp"
#include "sentcx/evaluation.hpp"
#include "sentcx/featurize.hpp"
#include "sentcx/io.hpp"
#include "sentcx/metrics.hpp"
#include "sentcx/pseudolabel.hpp"
#include "sentcx/scorer.hpp"
#include "sentcx/simindex.hpp"

namespace sentcx::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

const fs::path kStore = "corpus/store.jsonl";
const fs::path kCorpusStats = "corpus/stats.json";
const fs::path kVectors = "features/vectors.bin";
const fs::path kIndex = "index/index.bin";
const fs::path kBaseline = "models/baseline.json";
const fs::path kPseudoLabels = "pseudo/pseudo_labels.jsonl";
const fs::path kPseudoStats = "pseudo/stats.json";
const fs::path kPseudoTable = "pseudo/stats.txt";
const fs::path kEnsemble = "ensemble";
const fs::path kManifest = "manifest.json";

fs::path archetype_stats_path(std::size_t a) { return fs::path("features") / fmt::format("archetype_{}.json", a); }

// Stages whose artifacts each stage consumes directly.
const std::map<std::string, std::vector<std::string>, std::less<>> kStageDeps = {
    {"ingest", {}},
    {"featurize", {"ingest"}},
    {"index", {"featurize"}},
    {"train-baseline", {"featurize"}},
    {"pseudolabel", {"ingest", "index", "train-baseline"}},
    {"train-ensemble", {"pseudolabel", "featurize"}},
};

struct Options {
  std::string command;
  fs::path config;
  bool force = false;
  std::size_t workers = 1;
  fs::path input;
  fs::path output;
};

class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    const fs::path p = dir / ".lock";
    fd_ = ::open(p.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + p.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw ValidationError("another command is running on " + dir.string());
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

class Context {
 public:
  Context(Options opt, RunConfig cfg) : opt_(std::move(opt)), cfg_(std::move(cfg)), out_(cfg_.output_dir) {
    const fs::path mp = out_ / kManifest;
    if (fs::exists(mp)) {
      try {
        manifest_ = json::parse(io::read_file(mp));
      } catch (const json::exception& e) {
        throw UpstreamError(std::string("run manifest is corrupt (") + e.what() + "); re-run from `ingest`");
      }
    } else {
      manifest_ = json::object();
    }
    if (!manifest_.contains("stages")) manifest_["stages"] = json::object();
  }

  const Options& opt() const { return opt_; }
  const RunConfig& cfg() const { return cfg_; }
  fs::path at(const fs::path& rel) const { return out_ / rel; }

  void progress(std::string_view msg) const { fmt::print(stderr, "[{}] {}\n", opt_.command, msg); }

  // Reads an artifact of an earlier stage and records its digest.
  std::string read_artifact(const fs::path& rel) {
    const fs::path p = at(rel);
    if (!fs::exists(p)) throw UpstreamError("missing artifact " + rel.generic_string());
    std::string bytes = io::read_file(p);
    inputs_[rel.generic_string()] = sha256_hex(bytes);
    return bytes;
  }

  void record_external(const fs::path& p) {
    inputs_[fs::absolute(p).lexically_normal().string()] = sha256_file(p);
  }

  void record_tree(const fs::path& rel) {
    for (const auto& e : fs::recursive_directory_iterator(at(rel))) {
      if (!e.is_regular_file()) continue;
      inputs_[fs::relative(e.path(), out_).generic_string()] = sha256_file(e.path());
    }
  }

  void write(const fs::path& rel, std::string_view bytes) {
    const fs::path p = at(rel);
    fs::create_directories(p.parent_path());
    io::write_file_atomic(p, bytes);
    outputs_[rel.generic_string()] = sha256_hex(bytes);
  }

  void write_external(const fs::path& p, std::string_view bytes) {
    if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
    io::write_file_atomic(p, bytes);
    outputs_[p.string()] = sha256_hex(bytes);
  }

  void record_output_tree(const fs::path& rel) {
    for (const auto& e : fs::recursive_directory_iterator(at(rel))) {
      if (!e.is_regular_file()) continue;
      outputs_[fs::relative(e.path(), out_).generic_string()] = sha256_file(e.path());
    }
  }

  // Throws UpstreamError unless every stage in `stages` (and everything they
  // depend on) has run and its artifacts, inputs and config are unchanged.
  void require(const std::vector<std::string>& stages) const {
    std::set<std::string> seen;
    for (const auto& s : stages) check_stage(s, seen);
  }

  // Problems of one recorded stage; empty when fresh.
  std::string stage_problem(const std::string& stage, bool ignore_drift) const {
    const json& stages = manifest_["stages"];
    if (!stages.contains(stage)) return fmt::format("stage '{}' has not been run; run `{}` first", stage, stage);
    const json& entry = stages[stage];
    for (const auto& [rel, digest] : entry["outputs"].items()) {
      const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : at(rel);
      if (!fs::exists(p)) return fmt::format("artifact {} from stage '{}' is missing; re-run `{}`", rel, stage, stage);
      if (ignore_drift) continue;
      if (sha256_file(p) != digest.get<std::string>()) {
        return fmt::format("artifact {} was modified after stage '{}' wrote it; re-run `{}` (or pass --force)", rel,
                           stage, stage);
      }
    }
    if (ignore_drift) return {};
    for (const auto& [key, digest] : entry["inputs"].items()) {
      const fs::path p = fs::path(key).is_absolute() ? fs::path(key) : at(key);
      if (!fs::exists(p) || sha256_file(p) != digest.get<std::string>()) {
        return fmt::format("input {} of stage '{}' changed since it ran; re-run `{}` (or pass --force)", key, stage,
                           stage);
      }
    }
    if (entry.value("config", std::string()) != cfg_.section(stage)) {
      return fmt::format("configuration of stage '{}' changed since it ran; re-run `{}` (or pass --force)", stage,
                         stage);
    }
    return {};
  }

  std::vector<std::string> recorded_stages() const {
    std::vector<std::string> out;
    for (const auto& [name, entry] : manifest_["stages"].items()) out.push_back(name);
    return out;
  }

  void commit(const std::string& stage, std::chrono::steady_clock::time_point started) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest_["tool"] = "sentcx";
    manifest_["tool_version"] = kToolVersion;
    manifest_["config_path"] = fs::absolute(opt_.config).lexically_normal().string();
    manifest_["config_text"] = cfg_.source_text;
    manifest_["stages"][stage] = {
        {"config", cfg_.section(stage)},
        {"inputs", inputs_},
        {"outputs", outputs_},
        {"wall_clock_seconds", seconds},
        {"tool_version", kToolVersion},
    };
    io::write_file_atomic(out_ / kManifest, manifest_.dump(2) + "\n");
    progress(fmt::format("done in {:.2f}s", seconds));
  }

 private:
  void check_stage(const std::string& stage, std::set<std::string>& seen) const {
    if (!seen.insert(stage).second) return;
    if (const auto it = kStageDeps.find(stage); it != kStageDeps.end()) {
      for (const auto& dep : it->second) check_stage(dep, seen);
    }
    const std::string problem = stage_problem(stage, opt_.force);
    if (!problem.empty()) throw UpstreamError(problem);
  }

  Options opt_;
  RunConfig cfg_;
  fs::path out_;
  json manifest_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

std::vector<FeatureStats> load_feature_stats(Context& ctx) {
  std::vector<FeatureStats> stats;
  for (std::size_t a = 0; a < ctx.cfg().archetypes.size(); ++a) {
    FeatureStats s = FeatureStats::from_json(ctx.read_artifact(archetype_stats_path(a)));
    if (s.config != ctx.cfg().archetypes[a].features) {
      throw UpstreamError(fmt::format("{} does not match the configured archetype {}; re-run `featurize`",
                                      archetype_stats_path(a).generic_string(), a));
    }
    stats.push_back(std::move(s));
  }
  return stats;
}

std::vector<LabeledSentence> load_train(Context& ctx) {
  ctx.record_external(ctx.cfg().labeled_train);
  return load_labeled(ctx.cfg().labeled_train, ctx.cfg().default_rating_std);
}

std::vector<LabeledSentence> load_test(Context& ctx) {
  if (!ctx.cfg().labeled_test) return {};
  ctx.record_external(*ctx.cfg().labeled_test);
  return load_labeled(*ctx.cfg().labeled_test, ctx.cfg().default_rating_std);
}

std::vector<std::string> labeled_texts(std::span<const LabeledSentence> a, std::span<const LabeledSentence> b) {
  std::vector<std::string> out;
  for (const auto& s : a) out.push_back(s.text);
  for (const auto& s : b) out.push_back(s.text);
  return out;
}

VectorIndex load_index(Context& ctx, const fs::path& rel) {
  const std::string bytes = ctx.read_artifact(rel);
  const IndexCheck check = verify_index_bytes(bytes);
  if (!check.ok) throw UpstreamError(rel.generic_string() + " is damaged (" + check.message + ")");
  return VectorIndex::deserialize(bytes);
}

EnsembleBundle load_bundle(Context& ctx) {
  if (!fs::is_directory(ctx.at(kEnsemble))) throw UpstreamError("missing ensemble bundle; run `train-ensemble`");
  ctx.record_tree(kEnsemble);
  return EnsembleBundle::load(ctx.at(kEnsemble));
}

// Scores texts with the trained artifacts of the configured setting.
std::vector<double> score_texts(Context& ctx, Setting setting, std::span<const std::string> texts) {
  if (setting == Setting::baseline) {
    const FeatureStats stats = FeatureStats::from_json(ctx.read_artifact(archetype_stats_path(0)));
    const ScorerModel model = ScorerModel::from_json(ctx.read_artifact(kBaseline));
    const Eigen::VectorXd p = predict(model, embed_batch(texts, stats, ctx.opt().workers));
    return {p.data(), p.data() + p.size()};
  }
  EnsembleBundle bundle = load_bundle(ctx);
  if (setting == Setting::pseudo_only) return predict_base_mean(bundle, texts, ctx.opt().workers);
  bundle.aggregation.mode = setting == Setting::ensemble_stacker ? AggregationMode::stacker : AggregationMode::mean;
  return predict_ensemble(bundle, texts, ctx.opt().workers);
}

std::string model_stage_for(Setting setting) {
  return setting == Setting::baseline ? "train-baseline" : "train-ensemble";
}

void cmd_ingest(Context& ctx) {
  for (const auto& c : ctx.cfg().corpora) ctx.record_external(c.path);
  const IngestResult r = ingest_all(ctx.cfg().corpora, ctx.opt().workers);
  ctx.progress(fmt::format("{} sentences read, {} distinct", r.stats.total_sentences, r.stats.distinct_sentences));
  ctx.write(kStore, r.store.to_jsonl());
  ctx.write(kCorpusStats, stats_to_json(r.stats));
}

void cmd_featurize(Context& ctx) {
  ctx.require({"ingest"});
  const CorpusStore store = CorpusStore::from_jsonl(ctx.read_artifact(kStore));
  if (store.empty()) throw ValidationError("corpus store is empty; nothing to featurize");
  std::vector<FeatureStats> stats;
  for (const auto& a : ctx.cfg().archetypes) {
    stats.push_back(fit_feature_stats(store.records(), a.features));
    ctx.write(archetype_stats_path(static_cast<std::size_t>(a.id)), stats.back().to_json());
    ctx.progress(fmt::format("archetype {}: {} dimensions, fingerprint {}", a.id, a.features.dimension(),
                             fingerprint_hex(stats.back().fingerprint)));
  }
  std::vector<std::string> texts;
  std::vector<std::uint64_t> ids;
  for (const auto& r : store.records()) {
    texts.push_back(r.text);
    ids.push_back(r.id);
  }
  const FeatureMatrix x = embed_batch(texts, stats[0], ctx.opt().workers);
  std::vector<float> flat(x.values.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      flat[static_cast<std::size_t>(i * x.cols() + j)] = static_cast<float>(x.values(i, j));
    }
  }
  const VectorIndex vectors =
      VectorIndex::build(std::move(ids), std::move(flat), static_cast<std::size_t>(x.cols()), stats[0].fingerprint);
  ctx.write(kVectors, vectors.serialize());
  ctx.progress(fmt::format("embedded {} sentences", texts.size()));
}

void cmd_index(Context& ctx) {
  ctx.require({"featurize"});
  const FeatureStats stats = FeatureStats::from_json(ctx.read_artifact(archetype_stats_path(0)));
  const VectorIndex vectors = load_index(ctx, kVectors);
  if (vectors.fingerprint() != stats.fingerprint || vectors.dimension() != stats.config.dimension()) {
    throw UpstreamError("feature vectors do not match archetype 0 features; re-run `featurize`");
  }
  ctx.write(kIndex, vectors.serialize());
  ctx.progress(fmt::format("{} vectors of dimension {}", vectors.size(), vectors.dimension()));
}

void cmd_train_baseline(Context& ctx) {
  ctx.require({"featurize"});
  PipelineResources res;
  res.feature_stats.push_back(FeatureStats::from_json(ctx.read_artifact(archetype_stats_path(0))));
  res.baseline_lambda = ctx.cfg().baseline_lambda;
  res.workers = ctx.opt().workers;
  const auto train = load_train(ctx);
  const ScorerModel model = train_baseline(res, train);
  ctx.write(kBaseline, model.to_json());
  ctx.progress(fmt::format("baseline trained on {} sentences", train.size()));
}

void cmd_pseudolabel(Context& ctx) {
  ctx.require({"ingest", "index", "train-baseline"});
  const CorpusStore store = CorpusStore::from_jsonl(ctx.read_artifact(kStore));
  const VectorIndex index = load_index(ctx, kIndex);
  const FeatureStats stats = FeatureStats::from_json(ctx.read_artifact(archetype_stats_path(0)));
  const ScorerModel baseline = ScorerModel::from_json(ctx.read_artifact(kBaseline));
  const auto train = load_train(ctx);
  const auto test = load_test(ctx);
  PseudoLabelConfig pc;
  pc.k = ctx.cfg().k;
  pc.exclude_labeled = ctx.cfg().exclude_labeled;
  pc.baseline_seed = baseline.seed;
  const PseudoLabelSet set = generate_pseudo_labels(train, index, store, baseline, stats, labeled_texts(train, test),
                                                    pc, ctx.opt().workers);
  ctx.write(kPseudoLabels, set.labels_to_jsonl());
  ctx.write(kPseudoStats, set.stats_to_json());
  ctx.write(kPseudoTable, render_stats_table(set.stats));
  ctx.progress(fmt::format("{} pseudo-labels from {} anchors", set.labels.size(), train.size()));
}

void cmd_train_ensemble(Context& ctx) {
  ctx.require({"pseudolabel", "featurize"});
  const RunConfig& cfg = ctx.cfg();
  const PseudoLabelSet pseudo =
      PseudoLabelSet::from_jsonl(ctx.read_artifact(kPseudoLabels), ctx.read_artifact(kPseudoStats));
  const auto stats = load_feature_stats(ctx);
  const auto train = load_train(ctx);
  const std::size_t workers = ctx.opt().workers;

  ctx.progress(fmt::format("pseudo stage: {} archetypes x {} seeds on {} pseudo-labels", cfg.archetypes.size(),
                           cfg.seeds.size(), pseudo.labels.size()));
  const auto base = train_pseudo_stage(pseudo, cfg.archetypes, stats, cfg.seeds, cfg.pseudo_hyper, workers);
  const FoldPlan plan = make_fold_plan(train.size(), cfg.n_folds, cfg.fold_seed);
  ctx.progress(fmt::format("fine-tuning {} models over {} folds", base.size() * plan.n_folds, plan.n_folds));
  const CvFineTuneResult cv =
      cv_fine_tune(base, cfg.archetypes, stats, train, plan, cfg.fine_tune_hyper, cfg.stacker_columns, workers);
  const OofAudit audit = audit_oof(cv, plan);
  if (!audit.ok) throw Error("out-of-fold audit failed: " + audit.first_violation);
  if (audit.in_fold_entries > 0) {
    ctx.progress(fmt::format("warning: per_fold stacker columns include {} in-fold predictions",
                             audit.in_fold_entries));
  }

  std::vector<double> mos;
  for (const auto& s : train) mos.push_back(s.mos);
  EnsembleBundle bundle;
  bundle.archetypes = cfg.archetypes;
  bundle.feature_stats = stats;
  bundle.seeds = cfg.seeds;
  bundle.base_models = base;
  bundle.models = cv.models;
  bundle.plan = plan;
  bundle.aggregation.mode = cfg.setting == Setting::ensemble_mean ? AggregationMode::mean : AggregationMode::stacker;
  bundle.aggregation.columns = cfg.stacker_columns;
  bundle.aggregation.stacker = fit_stacker(cv.oof, mos);
  bundle.validate();
  bundle.save(ctx.at(kEnsemble), &cv.oof, train);
  ctx.record_output_tree(kEnsemble);
  ctx.progress(fmt::format("bundle with {} models written", bundle.models.size()));
}

void cmd_evaluate(Context& ctx) {
  const RunConfig& cfg = ctx.cfg();
  std::vector<std::string> needed = {"ingest", "index", "featurize"};
  if (cfg.shared_pseudo_labels) needed.push_back("pseudolabel");
  if (cfg.labeled_test) needed.push_back(model_stage_for(cfg.setting));
  ctx.require(needed);

  const CorpusStore store = CorpusStore::from_jsonl(ctx.read_artifact(kStore));
  const VectorIndex index = load_index(ctx, kIndex);
  const auto train = load_train(ctx);
  const auto test = load_test(ctx);

  PipelineResources res;
  res.store = &store;
  res.index = &index;
  res.archetypes = cfg.archetypes;
  res.feature_stats = load_feature_stats(ctx);
  res.seeds = cfg.seeds;
  res.labeled_texts = labeled_texts(train, test);
  res.pseudo_config.k = cfg.k;
  res.pseudo_config.exclude_labeled = cfg.exclude_labeled;
  res.baseline_lambda = cfg.baseline_lambda;
  res.pseudo_hyper = cfg.pseudo_hyper;
  res.fine_tune_hyper = cfg.fine_tune_hyper;
  res.inner_folds = cfg.n_folds;
  res.stacker_columns = cfg.stacker_columns;
  res.workers = ctx.opt().workers;
  PseudoLabelSet shared;
  if (cfg.shared_pseudo_labels) {
    shared = PseudoLabelSet::from_jsonl(ctx.read_artifact(kPseudoLabels), ctx.read_artifact(kPseudoStats));
    res.shared_pseudo = &shared;
  }

  const FoldPlan plan = make_fold_plan(train.size(), cfg.n_folds, cfg.fold_seed);
  ctx.progress(fmt::format("{}-fold cross-validation of {}", plan.n_folds, to_string(cfg.setting)));
  const EvalReport report = cross_validate(cfg.setting, train, res, plan);

  json doc = json::parse(report.to_json());
  doc["protocol"] = {{"n_folds", cfg.n_folds},
                     {"fold_seed", cfg.fold_seed},
                     {"pseudo_labels", cfg.shared_pseudo_labels ? "shared" : "per_fold"}};
  const EvalReport one[] = {report};
  std::string table = render_cv_table(one);
  if (cfg.labeled_test && !test.empty()) {
    std::vector<std::string> texts;
    std::vector<double> gold;
    for (const auto& s : test) {
      texts.push_back(s.text);
      gold.push_back(s.mos);
    }
    const auto pred = score_texts(ctx, cfg.setting, texts);
    const double raw = rmse(pred, gold);
    const MappedRmse mapped = mapped_rmse(pred, gold);
    doc["test"] = {{"sentences", test.size()}, {"rmse_raw", raw}, {"rmse_mapped", mapped.rmse}};
    table += fmt::format("\nTest set ({} sentences): RMSE {:.3f} with third-order mapping ({:.3f} without)\n",
                         test.size(), mapped.rmse, raw);
  }
  const std::string name = fmt::format("eval_{}", to_string(cfg.setting));
  ctx.write(fs::path("reports") / (name + ".json"), doc.dump(2) + "\n");
  ctx.write(fs::path("reports") / (name + ".txt"), table);
  ctx.progress(fmt::format("mean fold RMSE {:.3f}", report.mean_fold_rmse));
}

void cmd_predict(Context& ctx) {
  const RunConfig& cfg = ctx.cfg();
  ctx.require({model_stage_for(cfg.setting)});
  const fs::path input = ctx.opt().input;
  if (!fs::is_regular_file(input)) throw ValidationError("input file not found: " + input.string());
  ctx.record_external(fs::absolute(input).lexically_normal());
  const std::string text = io::read_file(input);
  const auto lines = io::split_lines(text);
  std::vector<std::size_t> ids;
  std::vector<std::string> sentences;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string s;
    try {
      s = normalize_sentence(lines[i]);
    } catch (const ParseError& e) {
      throw ParseError(std::string("input: ") + e.what(), i + 1);
    }
    if (s.empty()) continue;
    ids.push_back(i + 1);
    sentences.push_back(std::move(s));
  }
  const auto scores = score_texts(ctx, cfg.setting, sentences);
  std::string out = "id\tscore\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out += fmt::format("{}\t{:.3f}\n", ids[i], scores[i]);
  fs::path target = ctx.opt().output;
  if (target.empty()) target = ctx.at(fs::path("predictions") / (input.filename().string() + ".scores.tsv"));
  ctx.write_external(fs::absolute(target).lexically_normal(), out);
  ctx.progress(fmt::format("{} sentences scored -> {}", ids.size(), target.string()));
}

int cmd_verify(Context& ctx) {
  const auto stages = ctx.recorded_stages();
  if (stages.empty()) {
    ctx.progress("no stages recorded");
    return kExitUpstream;
  }
  bool ok = true;
  for (const auto& s : stages) {
    const std::string problem = ctx.stage_problem(s, false);
    ctx.progress(problem.empty() ? fmt::format("{}: ok", s) : fmt::format("{}: {}", s, problem));
    ok = ok && problem.empty();
  }
  for (const fs::path& rel : {kVectors, kIndex}) {
    if (!fs::exists(ctx.at(rel))) continue;
    const IndexCheck check = verify_index_bytes(io::read_file(ctx.at(rel)));
    if (!check.ok) {
      ctx.progress(fmt::format("{}: {}", rel.generic_string(), check.message));
      ok = false;
    }
  }
  return ok ? kExitOk : kExitUpstream;
}

int dispatch(const Options& opt) {
  RunConfig cfg = RunConfig::load(opt.config);
  fs::create_directories(cfg.output_dir);
  DirLock lock(cfg.output_dir);
  Context ctx(opt, std::move(cfg));
  const auto started = std::chrono::steady_clock::now();
  if (opt.command == "verify") return cmd_verify(ctx);
  if (opt.command == "ingest") cmd_ingest(ctx);
  else if (opt.command == "featurize") cmd_featurize(ctx);
  else if (opt.command == "index") cmd_index(ctx);
  else if (opt.command == "train-baseline") cmd_train_baseline(ctx);
  else if (opt.command == "pseudolabel") cmd_pseudolabel(ctx);
  else if (opt.command == "train-ensemble") cmd_train_ensemble(ctx);
  else if (opt.command == "evaluate") cmd_evaluate(ctx);
  else if (opt.command == "predict") cmd_predict(ctx);
  else throw ValidationError("unknown command '" + opt.command + "'");
  ctx.commit(opt.command, started);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Sentence complexity pseudo-labeling pipeline", args.empty() ? "sentcx" : args[0]};
  app.require_subcommand(1);
  Options opt;
  opt.workers = std::max(1u, std::thread::hardware_concurrency());

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ingest", "Read corpora into a normalized, deduplicated sentence store"},
      {"featurize", "Fit feature statistics and embed the corpus"},
      {"index", "Build the similarity index"},
      {"train-baseline", "Train the baseline scorer on the labeled training set"},
      {"pseudolabel", "Retrieve and filter pseudo-labels"},
      {"train-ensemble", "Train the pseudo-stage models and the cross-validated ensemble"},
      {"evaluate", "Cross-validate the configured setting"},
      {"predict", "Score sentences from a file, one per line"},
      {"verify", "Check recorded artifact digests"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "Run configuration (JSON)")->required();
    sub->add_flag("--force", opt.force, "Run even if upstream artifacts changed since they were recorded");
    sub->add_option("--workers", opt.workers, "Worker threads")->check(CLI::PositiveNumber);
    if (name == "predict") {
      sub->add_option("--input", opt.input, "Sentences, one per line")->required();
      sub->add_option("--output", opt.output, "Output TSV (default: <output_dir>/predictions/)");
    }
    sub->callback([&opt, n = name] { opt.command = n; });
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("sentcx");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    return dispatch(opt);
  } catch (const UpstreamError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUpstream;
  } catch (const ConfigMismatchError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUpstream;
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const ParseError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const IoError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return kExitInternal;
  }
}

}  // namespace sentcx::cli

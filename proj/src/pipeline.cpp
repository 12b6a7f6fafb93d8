#include "cmsent/pipeline.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "cmsent/error.hpp"
#include "cmsent/log.hpp"

namespace cmsent {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

fs::path resolve_path(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

void require_file(const fs::path& p, const std::string& field) {
  if (!fs::exists(p)) throw ConfigError(field + ": file not found: " + p.string());
}

// Typed access to one JSON object with field-path error messages.
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string at(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }
  // An explicit null counts as absent.
  bool has(std::string_view key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  T get(std::string_view key, T fallback) const {
    if (!has(key)) return fallback;
    return convert<T>(key);
  }

  template <typename T>
  T require(std::string_view key) const {
    if (!has(key)) throw ConfigError(at(key) + ": required field missing");
    return convert<T>(key);
  }

  template <typename T>
  std::optional<T> optional(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return convert<T>(key);
  }

  Fields section(std::string_view key) const {
    static const nlohmann::json empty = nlohmann::json::object();
    return has(key) ? Fields(j_.at(key), at(key)) : Fields(empty, at(key));
  }

  const nlohmann::json& raw(std::string_view key) const { return j_.at(key); }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (auto k : keys) known = known || it.key() == k;
      if (!known) throw ConfigError(at(it.key()) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  template <typename T>
  T convert(std::string_view key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(at(key) + ": wrong type");
    }
  }

  const nlohmann::json& j_;
  std::string path_;
};

SkipgramConfig parse_skipgram(const Fields& f) {
  f.allow({"dim", "window", "negatives", "epochs", "lr", "min_count", "subsample_t", "seed"});
  SkipgramConfig c;
  c.dim = f.get("dim", c.dim);
  c.window = f.get("window", c.window);
  c.negatives = f.get("negatives", c.negatives);
  c.epochs = f.get("epochs", c.epochs);
  c.initial_lr = f.get("lr", c.initial_lr);
  c.min_count = f.get("min_count", c.min_count);
  c.subsample_t = f.get("subsample_t", c.subsample_t);
  c.seed = f.get("seed", c.seed);
  return c;
}

json skipgram_json(const SkipgramConfig& c) {
  return {{"dim", c.dim},         {"window", c.window},         {"negatives", c.negatives},
          {"epochs", c.epochs},   {"lr", c.initial_lr},         {"min_count", c.min_count},
          {"subsample_t", c.subsample_t}, {"seed", c.seed}};
}

NGramConfig parse_ngrams(const Fields& f) {
  f.allow({"n_min", "n_max", "buckets", "oov_reduce"});
  NGramConfig c;
  c.n_min = f.get("n_min", c.n_min);
  c.n_max = f.get("n_max", c.n_max);
  c.buckets = f.get("buckets", c.buckets);
  const auto reduce = f.get<std::string>("oov_reduce", "sum");
  if (reduce == "sum") c.oov_reduce = OovReduce::sum;
  else if (reduce == "mean") c.oov_reduce = OovReduce::mean;
  else throw ConfigError(f.at("oov_reduce") + ": expected \"sum\" or \"mean\"");
  return c;
}

json ngrams_json(const NGramConfig& c) {
  return {{"n_min", c.n_min},
          {"n_max", c.n_max},
          {"buckets", c.buckets},
          {"oov_reduce", c.oov_reduce == OovReduce::sum ? "sum" : "mean"}};
}

AdversarialConfig parse_adversarial(const Fields& f) {
  f.allow({"discriminator_hidden", "discriminator_layers", "discriminator_input_dropout", "smoothing", "ortho_beta",
           "steps", "discriminator_steps", "batch", "lr", "map_lr", "vocab_top", "validation_words", "eval_every",
           "restarts", "seed"});
  AdversarialConfig c;
  c.discriminator_hidden = f.get("discriminator_hidden", c.discriminator_hidden);
  c.discriminator_layers = f.get("discriminator_layers", c.discriminator_layers);
  c.discriminator_input_dropout = f.get("discriminator_input_dropout", c.discriminator_input_dropout);
  c.smoothing = f.get("smoothing", c.smoothing);
  c.ortho_beta = f.get("ortho_beta", c.ortho_beta);
  c.steps = f.get("steps", c.steps);
  c.discriminator_steps = f.get("discriminator_steps", c.discriminator_steps);
  c.batch = f.get("batch", c.batch);
  c.lr = f.get("lr", c.lr);
  c.map_lr = f.get("map_lr", c.map_lr);
  c.vocab_top = f.get("vocab_top", c.vocab_top);
  c.validation_words = f.get("validation_words", c.validation_words);
  c.eval_every = f.get("eval_every", c.eval_every);
  c.restarts = f.get("restarts", c.restarts);
  c.seed = f.get("seed", c.seed);
  return c;
}

json adversarial_json(const AdversarialConfig& c) {
  return {{"discriminator_hidden", c.discriminator_hidden},
          {"discriminator_layers", c.discriminator_layers},
          {"discriminator_input_dropout", c.discriminator_input_dropout},
          {"smoothing", c.smoothing},
          {"ortho_beta", c.ortho_beta},
          {"steps", c.steps},
          {"discriminator_steps", c.discriminator_steps},
          {"batch", c.batch},
          {"lr", c.lr},
          {"map_lr", c.map_lr},
          {"vocab_top", c.vocab_top},
          {"validation_words", c.validation_words},
          {"eval_every", c.eval_every},
          {"restarts", c.restarts},
          {"seed", c.seed}};
}

std::string_view embedding_kind_name(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::mapped: return "mapped";
    case EmbeddingKind::pseudo_multilingual: return "pseudo_multilingual";
    case EmbeddingKind::sentence: return "sentence";
  }
  return "unknown";
}

json path_json(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

AlignResult align_and_merge(const EmbeddingSpace& src_raw, const EmbeddingSpace& tgt_raw, AlignMethod method,
                            const std::optional<fs::path>& dictionary, int refine_iters, const RefineConfig& refine_cfg,
                            const AdversarialConfig& adversarial) {
  if (src_raw.dim() != tgt_raw.dim()) {
    throw DimensionError("source dimension " + std::to_string(src_raw.dim()) + " differs from target dimension " +
                         std::to_string(tgt_raw.dim()));
  }
  const auto src = l2_normalize(src_raw);
  const auto tgt = l2_normalize(tgt_raw);
  LinearMap w;
  if (method == AlignMethod::procrustes) {
    if (!dictionary) throw ConfigError("procrustes alignment needs a bilingual dictionary");
    std::size_t skipped = 0;
    w = procrustes(src, tgt, load_dictionary(*dictionary), &skipped);
    if (skipped) warn(std::to_string(skipped) + " dictionary pairs not found in the vocabularies");
  } else {
    w = adversarial_align(src, tgt, adversarial);
  }
  if (refine_iters > 0) w = refine(src, tgt, w, refine_iters, refine_cfg);
  auto mapped = map_space(src, w);
  return {w, merge_spaces(mapped, tgt)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Output handling

fs::path resolve_output_dir(const fs::path& requested) {
  if (const char* env = std::getenv("CMSENT_OUTPUT_DIR"); env && *env) return fs::path(env);
  return requested;
}

int resolve_threads(int requested) {
  const char* env = std::getenv("CMSENT_THREADS");
  if (!env || !*env) return requested;
  int value = 0;
  const std::string_view s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || value < 1) {
    throw ConfigError("CMSENT_THREADS must be a positive integer, got \"" + std::string(s) + "\"");
  }
  return value;
}

void prepare_output_dir(const fs::path& dir, bool overwrite) {
  if (dir.empty()) throw ConfigError("output directory not set");
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
    if (!overwrite && !fs::is_empty(dir)) {
      throw IoError("output directory " + dir.string() + " is not empty (pass --overwrite to reuse it)");
    }
  }
  fs::create_directories(dir);
}

std::string file_digest(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& settings,
                    std::span<const fs::path> inputs, std::span<const fs::path> outputs) {
  json m;
  m["command"] = command;
  m["settings"] = settings;
  m["inputs"] = json::array();
  for (const auto& p : inputs) {
    if (fs::is_regular_file(p)) m["inputs"].push_back({{"path", p.string()}, {"fnv1a64", file_digest(p)}});
  }
  m["outputs"] = json::array();
  for (const auto& p : outputs) m["outputs"].push_back(p.filename().string());
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Commands

EmbedTrainResult cmd_embed_train(const EmbedTrainOptions& options, const fs::path& out_dir, bool overwrite) {
  if (options.corpora.empty()) throw ConfigError("embed-train needs at least one corpus");
  for (const auto& p : options.corpora) require_file(p, "corpus");
  options.skipgram.validate();
  options.ngrams.validate();
  const Corpus corpus = read_corpus(options.corpora);
  std::size_t tokens = 0;
  for (const auto& s : corpus) tokens += s.size();
  if (tokens == 0) throw Error("the training corpus is empty");

  prepare_output_dir(out_dir, overwrite);
  const auto space = train_skipgram(corpus, options.skipgram, options.ngrams);
  const fs::path prefix = out_dir / "embedding";
  save_subword_space(space, prefix);
  write_manifest(out_dir, "embed-train",
                 {{"skipgram", skipgram_json(options.skipgram)}, {"ngrams", ngrams_json(options.ngrams)}},
                 options.corpora,
                 std::vector<fs::path>{with_suffix(prefix, ".words.vec"), with_suffix(prefix, ".ngrams.vec"),
                                       with_suffix(prefix, ".meta.json")});
  return {prefix, space.base.size(), space.dim()};
}

AlignMethod parse_align_method(std::string_view s) {
  if (s == "procrustes") return AlignMethod::procrustes;
  if (s == "adversarial") return AlignMethod::adversarial;
  throw ConfigError("unknown alignment method \"" + std::string(s) + "\"");
}

std::string_view align_method_name(AlignMethod m) {
  return m == AlignMethod::procrustes ? "procrustes" : "adversarial";
}

AlignResult cmd_align(const AlignOptions& options, const fs::path& out_dir, bool overwrite) {
  if (options.method == AlignMethod::procrustes && !options.dictionary) {
    throw ConfigError("procrustes alignment needs --dict");
  }
  require_file(options.source, "source");
  require_file(options.target, "target");
  if (options.dictionary) require_file(*options.dictionary, "dictionary");
  if (options.refine_iters < 0) throw ConfigError("refine iterations must be nonnegative");
  const auto src = load_embeddings(options.source);
  const auto tgt = load_embeddings(options.target);
  if (src.dim() != tgt.dim()) {
    throw DimensionError("source dimension " + std::to_string(src.dim()) + " differs from target dimension " +
                         std::to_string(tgt.dim()));
  }
  prepare_output_dir(out_dir, overwrite);
  auto result = align_and_merge(src, tgt, options.method, options.dictionary, options.refine_iters, options.refine,
                                options.adversarial);
  save_map(result.map, out_dir / "map.txt");
  save_embeddings(result.merged, out_dir / "merged.vec");
  std::vector<fs::path> inputs{options.source, options.target};
  if (options.dictionary) inputs.push_back(*options.dictionary);
  write_manifest(out_dir, "align",
                 {{"method", align_method_name(options.method)},
                  {"refine_iters", options.refine_iters},
                  {"adversarial", adversarial_json(options.adversarial)}},
                 inputs, std::vector<fs::path>{out_dir / "map.txt", out_dir / "merged.vec"});
  return result;
}

EmbeddingSpace cmd_merge(const fs::path& a, const fs::path& b, const fs::path& out_dir, bool overwrite) {
  require_file(a, "first space");
  require_file(b, "second space");
  const auto merged = merge_spaces(load_embeddings(a), load_embeddings(b));
  prepare_output_dir(out_dir, overwrite);
  save_embeddings(merged, out_dir / "merged.vec");
  write_manifest(out_dir, "merge", json::object(), std::vector<fs::path>{a, b},
                 std::vector<fs::path>{out_dir / "merged.vec"});
  return merged;
}

void SynthOptions::validate() const {
  if (lexicon_size < 1) throw ConfigError("synth.lexicon_size must be positive");
  if (vocab_size < 2 * lexicon_size + 3) throw ConfigError("synth.vocab_size too small for the lexicons");
  if (train_sentences < 10) throw ConfigError("synth.train_sentences must be at least 10");
  if (test_sentences < 1) throw ConfigError("synth.test_sentences must be positive");
  if (min_length < 1 || max_length < min_length) throw ConfigError("synth: bad sentence length range");
  if (!(switch_prob >= 0.0 && switch_prob <= 1.0)) throw ConfigError("synth.switch_prob must lie in [0, 1]");
  if (!(cipher.respell_rate >= 0.0 && cipher.respell_rate <= 1.0)) {
    throw ConfigError("synth.respell_rate must lie in [0, 1]");
  }
  if (cipher.prefix.empty()) throw ConfigError("synth.cipher_prefix must be nonempty");
}

SynthOptions SynthOptions::from_json(const nlohmann::json& j) {
  const Fields f(j, "synth");
  f.allow({"vocab_size", "lexicon_size", "corpus_sentences", "train_sentences", "codemixed_train_sentences",
           "test_sentences", "min_length", "max_length", "switch_prob", "intent_affinity", "cipher_prefix",
           "respell_rate", "seed"});
  SynthOptions o;
  o.vocab_size = f.get("vocab_size", o.vocab_size);
  o.lexicon_size = f.get("lexicon_size", o.lexicon_size);
  o.corpus_sentences = f.get("corpus_sentences", o.corpus_sentences);
  o.train_sentences = f.get("train_sentences", o.train_sentences);
  o.codemixed_train_sentences = f.get("codemixed_train_sentences", o.codemixed_train_sentences);
  o.test_sentences = f.get("test_sentences", o.test_sentences);
  o.min_length = f.get("min_length", o.min_length);
  o.max_length = f.get("max_length", o.max_length);
  o.switch_prob = f.get("switch_prob", o.switch_prob);
  o.intent_affinity = f.get("intent_affinity", o.intent_affinity);
  o.cipher.prefix = f.get("cipher_prefix", o.cipher.prefix);
  o.cipher.respell_rate = f.get("respell_rate", o.cipher.respell_rate);
  o.seed = f.get("seed", o.seed);
  o.validate();
  return o;
}

json SynthOptions::to_json() const {
  return {{"vocab_size", vocab_size},
          {"lexicon_size", lexicon_size},
          {"corpus_sentences", corpus_sentences},
          {"train_sentences", train_sentences},
          {"codemixed_train_sentences", codemixed_train_sentences},
          {"test_sentences", test_sentences},
          {"min_length", min_length},
          {"max_length", max_length},
          {"switch_prob", switch_prob},
          {"intent_affinity", intent_affinity},
          {"cipher_prefix", cipher.prefix},
          {"respell_rate", cipher.respell_rate},
          {"seed", seed}};
}

SynthBundle generate_synth(const SynthOptions& o) {
  o.validate();
  SynthBundle b;
  b.config = SynthConfig::standard(o.vocab_size, o.lexicon_size, o.train_sentences, o.seed);
  b.config.min_length = o.min_length;
  b.config.max_length = o.max_length;
  b.config.switch_prob = o.switch_prob;
  b.config.intent_affinity = o.intent_affinity;
  b.lexicon = build_cipher_lexicon(b.config.vocabulary, derive_seed(o.seed, 0), o.cipher);

  auto part = [&](std::size_t n, std::uint64_t stream, const char* prefix) {
    SynthConfig c = b.config;
    c.n_sentences = n;
    c.seed = derive_seed(o.seed, stream);
    c.id_prefix = prefix;
    c.origin = Origin::en;
    return gen_mono_corpus(c);
  };
  b.corpus_source = part(o.corpus_sentences, 1, "c");
  b.corpus_cipher = gen_codemixed(b.corpus_source, b.lexicon, 1.0, derive_seed(o.seed, 2));
  b.train = part(o.train_sentences, 3, "t");
  b.codemixed_train =
      gen_codemixed(part(o.codemixed_train_sentences, 4, "m"), b.lexicon, o.switch_prob, derive_seed(o.seed, 5));
  b.test = gen_codemixed(part(o.test_sentences, 6, "e"), b.lexicon, o.switch_prob, derive_seed(o.seed, 7));
  return b;
}

SynthBundle cmd_synth(const SynthOptions& options, const fs::path& out_dir, bool overwrite) {
  auto b = generate_synth(options);
  prepare_output_dir(out_dir, overwrite);
  write_corpus(to_corpus(b.corpus_source), out_dir / "corpus.source.txt");
  write_corpus(to_corpus(b.corpus_cipher), out_dir / "corpus.cipher.txt");
  save_dataset(b.train, out_dir / "train.en.tsv");
  save_dataset(b.codemixed_train, out_dir / "train.cm.tsv");
  save_dataset(b.test, out_dir / "test.cm.tsv");
  save_dictionary(b.lexicon.as_dictionary(), out_dir / "dictionary.tsv");
  std::string lexicon;
  for (const auto& t : b.config.pos_lexicon) lexicon += t + "\tpositive\n";
  for (const auto& t : b.config.neg_lexicon) lexicon += t + "\tnegative\n";
  write_text(out_dir / "lexicon.tsv", lexicon);
  std::vector<fs::path> outputs;
  for (const char* name : {"corpus.source.txt", "corpus.cipher.txt", "train.en.tsv", "train.cm.tsv", "test.cm.tsv",
                           "dictionary.tsv", "lexicon.tsv"}) {
    outputs.push_back(out_dir / name);
  }
  write_manifest(out_dir, "synth", options.to_json(), {}, outputs);
  return b;
}

// ---------------------------------------------------------------------------
// Pipeline configuration

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  const Fields root(j, "");
  root.allow({"embeddings", "data", "model", "curriculum", "output"});
  PipelineConfig c;

  const auto e = root.section("embeddings");
  e.allow({"kind", "space", "corpora", "skipgram", "ngrams", "merged", "source", "target", "method", "dictionary",
           "refine_iters", "refine", "adversarial", "vectors"});
  const auto kind = e.require<std::string>("kind");
  if (kind == "mapped") c.embeddings.kind = EmbeddingKind::mapped;
  else if (kind == "pseudo_multilingual") c.embeddings.kind = EmbeddingKind::pseudo_multilingual;
  else if (kind == "sentence") c.embeddings.kind = EmbeddingKind::sentence;
  else throw ConfigError(e.at("kind") + ": expected mapped, pseudo_multilingual or sentence");
  auto opt_path = [&](const Fields& f, std::string_view key) -> std::optional<fs::path> {
    if (auto s = f.optional<std::string>(key)) return resolve_path(base_dir, *s);
    return std::nullopt;
  };
  c.embeddings.space = opt_path(e, "space");
  for (const auto& p : e.get<std::vector<std::string>>("corpora", {})) c.embeddings.corpora.push_back(resolve_path(base_dir, p));
  c.embeddings.skipgram = parse_skipgram(e.section("skipgram"));
  c.embeddings.ngrams = parse_ngrams(e.section("ngrams"));
  c.embeddings.merged = opt_path(e, "merged");
  c.embeddings.source = opt_path(e, "source");
  c.embeddings.target = opt_path(e, "target");
  try {
    c.embeddings.method = parse_align_method(e.get<std::string>("method", "adversarial"));
  } catch (const ConfigError&) {
    throw ConfigError(e.at("method") + ": expected procrustes or adversarial");
  }
  c.embeddings.dictionary = opt_path(e, "dictionary");
  c.embeddings.refine_iters = e.get("refine_iters", c.embeddings.refine_iters);
  {
    const auto r = e.section("refine");
    r.allow({"top_n", "k", "validation_words"});
    c.embeddings.refine.top_n = r.get("top_n", c.embeddings.refine.top_n);
    c.embeddings.refine.k = r.get("k", c.embeddings.refine.k);
    c.embeddings.refine.validation_words = r.get("validation_words", c.embeddings.refine.validation_words);
  }
  c.embeddings.adversarial = parse_adversarial(e.section("adversarial"));
  c.embeddings.vectors = opt_path(e, "vectors");

  const auto d = root.section("data");
  d.allow({"monolingual", "codemixed_train", "test", "val_fraction"});
  if (d.has("monolingual")) {
    const auto& arr = d.raw("monolingual");
    if (!arr.is_array()) throw ConfigError(d.at("monolingual") + ": expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Fields item(arr[i], d.at("monolingual") + "[" + std::to_string(i) + "]");
      item.allow({"path", "origin"});
      DatasetInput in;
      in.path = resolve_path(base_dir, item.require<std::string>("path"));
      try {
        in.origin = parse_origin(item.get<std::string>("origin", "unknown"));
      } catch (const ConfigError&) {
        throw ConfigError(item.at("origin") + ": expected en, es, cm or unknown");
      }
      c.data.monolingual.push_back(std::move(in));
    }
  }
  c.data.codemixed_train = opt_path(d, "codemixed_train");
  c.data.test = opt_path(d, "test");
  c.data.val_fraction = d.get("val_fraction", c.data.val_fraction);

  const auto m = root.section("model");
  m.allow({"path", "units", "input_dropout", "recurrent_dropout"});
  const auto path_kind = m.get<std::string>("path", "token");
  if (path_kind == "token") c.model.encoder = EncoderKind::bilstm;
  else if (path_kind == "sentence") c.model.encoder = EncoderKind::identity;
  else throw ConfigError(m.at("path") + ": expected token or sentence");
  c.model.units = m.get("units", c.model.units);
  c.model.dropout.input_rate = m.get("input_dropout", c.model.dropout.input_rate);
  c.model.dropout.recurrent_rate = m.get("recurrent_dropout", c.model.dropout.recurrent_rate);

  const auto cu = root.section("curriculum");
  cu.allow({"mode", "kind", "max_epochs", "patience", "batch_size", "lr", "beta1", "seed", "dropout", "threads"});
  try {
    c.curriculum.mode = parse_mode(cu.require<std::string>("mode"));
  } catch (const ConfigError& err) {
    if (cu.has("mode")) throw ConfigError(cu.at("mode") + ": expected unsupervised, partially_supervised or supervised");
    throw;
  }
  try {
    c.curriculum.kind = parse_curriculum(cu.get<std::string>("kind", "staged"));
  } catch (const ConfigError&) {
    throw ConfigError(cu.at("kind") + ": expected staged or mixed");
  }
  auto& t = c.curriculum.train;
  t.max_epochs = cu.get("max_epochs", t.max_epochs);
  t.patience = cu.get("patience", t.patience);
  t.batch_size = cu.get("batch_size", t.batch_size);
  t.lr = cu.get("lr", t.lr);
  t.beta1 = cu.get("beta1", t.beta1);
  t.seed = cu.get("seed", t.seed);
  t.dropout = cu.get("dropout", t.dropout);
  c.threads = cu.get("threads", c.threads);

  const auto o = root.section("output");
  o.allow({"directory"});
  c.output_dir = resolve_path(base_dir, o.require<std::string>("directory"));
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return from_json(j, base);
}

void PipelineConfig::validate() const {
  const auto& e = embeddings;
  const auto mode = curriculum.mode;
  switch (e.kind) {
    case EmbeddingKind::pseudo_multilingual:
      if (e.space.has_value() == !e.corpora.empty()) {
        throw ConfigError("embeddings: pseudo_multilingual needs exactly one of space or corpora");
      }
      if (e.space) require_file(with_suffix(*e.space, ".meta.json"), "embeddings.space");
      for (const auto& p : e.corpora) require_file(p, "embeddings.corpora");
      e.skipgram.validate();
      e.ngrams.validate();
      break;
    case EmbeddingKind::mapped:
      if (e.merged.has_value() == (e.source.has_value() || e.target.has_value())) {
        throw ConfigError("embeddings: mapped needs either merged or both source and target");
      }
      if (e.merged) require_file(*e.merged, "embeddings.merged");
      if (!e.merged) {
        if (!e.source || !e.target) throw ConfigError("embeddings: mapped needs both source and target");
        require_file(*e.source, "embeddings.source");
        require_file(*e.target, "embeddings.target");
      }
      if (e.method == AlignMethod::procrustes && !e.dictionary && !e.merged) {
        throw ConfigError("embeddings.dictionary: required for procrustes alignment");
      }
      if (e.dictionary) require_file(*e.dictionary, "embeddings.dictionary");
      if (e.refine_iters < 0) throw ConfigError("embeddings.refine_iters: must be nonnegative");
      if (e.method == AlignMethod::adversarial) e.adversarial.validate();
      break;
    case EmbeddingKind::sentence:
      if (!e.vectors) throw ConfigError("embeddings.vectors: required for sentence embeddings");
      require_file(*e.vectors, "embeddings.vectors");
      break;
  }

  // Mode taxonomy: cross-lingual supervision in the embedding and code-mixed labels.
  const bool embedding_supervised = e.kind == EmbeddingKind::sentence ||
                                    (e.kind == EmbeddingKind::mapped && e.method == AlignMethod::procrustes);
  if (mode == LearningMode::unsupervised && embedding_supervised) {
    throw ConfigError("curriculum.mode: unsupervised mode needs an embedding without cross-lingual supervision "
                      "(pseudo_multilingual, or mapped with the adversarial method)");
  }
  if (mode == LearningMode::partially_supervised && !embedding_supervised) {
    throw ConfigError("curriculum.mode: partially_supervised mode needs a cross-lingually supervised embedding "
                      "(mapped with procrustes, or sentence)");
  }
  if (mode == LearningMode::supervised && !data.codemixed_train) {
    throw ConfigError("data.codemixed_train: required in supervised mode");
  }
  if (mode != LearningMode::supervised && data.codemixed_train) {
    throw ConfigError("data.codemixed_train: code-mixed labels are not allowed in " +
                      std::string(mode_name(mode)) + " mode");
  }
  if (curriculum.kind == CurriculumKind::mixed && mode != LearningMode::supervised) {
    throw ConfigError("curriculum.kind: mixed requires supervised mode");
  }
  if ((model.encoder == EncoderKind::identity) != (e.kind == EmbeddingKind::sentence)) {
    throw ConfigError("model.path: the sentence path goes with sentence embeddings, the token path with word embeddings");
  }
  if (data.monolingual.empty()) throw ConfigError("data.monolingual: at least one dataset required");
  for (std::size_t i = 0; i < data.monolingual.size(); ++i) {
    require_file(data.monolingual[i].path, "data.monolingual[" + std::to_string(i) + "].path");
  }
  if (data.codemixed_train) require_file(*data.codemixed_train, "data.codemixed_train");
  if (data.test) require_file(*data.test, "data.test");
  if (!(data.val_fraction > 0.0 && data.val_fraction < 1.0)) {
    throw ConfigError("data.val_fraction: must lie in (0, 1)");
  }
  if (model.units < 1) throw ConfigError("model.units: must be positive");
  try {
    model.dropout.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("model: ") + err.what());
  }
  try {
    curriculum.train.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("curriculum: ") + err.what());
  }
  if (threads < 1) throw ConfigError("curriculum.threads: must be positive");
  if (output_dir.empty()) throw ConfigError("output.directory: required");
}

json PipelineConfig::to_json() const {
  json e;
  e["kind"] = embedding_kind_name(embeddings.kind);
  e["space"] = path_json(embeddings.space);
  e["corpora"] = json::array();
  for (const auto& p : embeddings.corpora) e["corpora"].push_back(p.string());
  e["skipgram"] = skipgram_json(embeddings.skipgram);
  e["ngrams"] = ngrams_json(embeddings.ngrams);
  e["merged"] = path_json(embeddings.merged);
  e["source"] = path_json(embeddings.source);
  e["target"] = path_json(embeddings.target);
  e["method"] = align_method_name(embeddings.method);
  e["dictionary"] = path_json(embeddings.dictionary);
  e["refine_iters"] = embeddings.refine_iters;
  e["refine"] = {{"top_n", embeddings.refine.top_n},
                 {"k", embeddings.refine.k},
                 {"validation_words", embeddings.refine.validation_words}};
  e["adversarial"] = adversarial_json(embeddings.adversarial);
  e["vectors"] = path_json(embeddings.vectors);

  json d;
  d["monolingual"] = json::array();
  for (const auto& in : data.monolingual) {
    d["monolingual"].push_back({{"path", in.path.string()}, {"origin", origin_name(in.origin)}});
  }
  d["codemixed_train"] = path_json(data.codemixed_train);
  d["test"] = path_json(data.test);
  d["val_fraction"] = data.val_fraction;

  const auto& t = curriculum.train;
  return {{"embeddings", e},
          {"data", d},
          {"model",
           {{"path", model.encoder == EncoderKind::bilstm ? "token" : "sentence"},
            {"units", model.units},
            {"input_dropout", model.dropout.input_rate},
            {"recurrent_dropout", model.dropout.recurrent_rate}}},
          {"curriculum",
           {{"mode", mode_name(curriculum.mode)},
            {"kind", curriculum_name(curriculum.kind)},
            {"max_epochs", t.max_epochs},
            {"patience", t.patience},
            {"batch_size", t.batch_size},
            {"lr", t.lr},
            {"beta1", t.beta1},
            {"seed", t.seed},
            {"dropout", t.dropout},
            {"threads", threads}}},
          {"output", {{"directory", output_dir.string()}}}};
}

// ---------------------------------------------------------------------------
// Training and evaluation

TokenVectorizer LoadedEmbedding::vectorizer() const {
  return subword ? TokenVectorizer(*subword) : TokenVectorizer(*words);
}

std::size_t LoadedEmbedding::dim() const { return subword ? subword->dim() : words->dim(); }

LoadedEmbedding load_embedding_artifact(const fs::path& path) {
  LoadedEmbedding out;
  if (fs::exists(with_suffix(path, ".meta.json"))) {
    out.subword = load_subword_space(path);
  } else if (fs::is_regular_file(path)) {
    out.words = load_embeddings(path);
  } else {
    throw IoError("no embedding at " + path.string() + " (expected a .vec file or a subword-space prefix)");
  }
  return out;
}

PipelineResult cmd_train(const PipelineConfig& cfg_in, bool evaluate, bool overwrite) {
  PipelineConfig cfg = cfg_in;
  cfg.output_dir = resolve_output_dir(cfg.output_dir);
  cfg.threads = resolve_threads(cfg.threads);
  cfg.validate();
  if (evaluate && !cfg.data.test) throw ConfigError("data.test: required by pipeline run");
  prepare_output_dir(cfg.output_dir, overwrite);
  const fs::path& out = cfg.output_dir;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;

  // Embedding stage.
  const auto& e = cfg.embeddings;
  LoadedEmbedding emb;
  switch (e.kind) {
    case EmbeddingKind::pseudo_multilingual:
      if (e.space) {
        emb.subword = load_subword_space(*e.space);
        for (const char* s : {".words.vec", ".ngrams.vec", ".meta.json"}) inputs.push_back(with_suffix(*e.space, s));
      } else {
        emb.subword = train_skipgram(read_corpus(e.corpora), e.skipgram, e.ngrams);
        save_subword_space(*emb.subword, out / "embedding");
        inputs.insert(inputs.end(), e.corpora.begin(), e.corpora.end());
        for (const char* s : {".words.vec", ".ngrams.vec", ".meta.json"}) outputs.push_back(with_suffix(out / "embedding", s));
      }
      break;
    case EmbeddingKind::mapped:
      if (e.merged) {
        emb.words = load_embeddings(*e.merged);
        inputs.push_back(*e.merged);
      } else {
        auto aligned = align_and_merge(load_embeddings(*e.source), load_embeddings(*e.target), e.method, e.dictionary,
                                       e.refine_iters, e.refine, e.adversarial);
        save_map(aligned.map, out / "map.txt");
        save_embeddings(aligned.merged, out / "merged.vec");
        emb.words = std::move(aligned.merged);
        inputs.push_back(*e.source);
        inputs.push_back(*e.target);
        if (e.dictionary) inputs.push_back(*e.dictionary);
        outputs.push_back(out / "map.txt");
        outputs.push_back(out / "merged.vec");
      }
      break;
    case EmbeddingKind::sentence:
      emb.words = load_embeddings(*e.vectors);
      inputs.push_back(*e.vectors);
      break;
  }

  const bool sentence_path = cfg.model.encoder == EncoderKind::identity;
  std::optional<TokenVectorizer> vec;
  if (!sentence_path) vec = emb.vectorizer();
  auto encode = [&](std::span<const LabeledExample> ex) {
    return sentence_path ? encode_sentence_vectors(ex, *emb.words) : encode_examples(ex, *vec);
  };
  const auto& t = cfg.curriculum.train;
  auto split_and_encode = [&](const fs::path& path, Origin origin, std::uint64_t stream) {
    const auto examples = load_dataset(path, origin);
    inputs.push_back(path);
    auto [train, validation] = make_splits(examples, cfg.data.val_fraction, derive_seed(t.seed, stream));
    return EncodedSplit{encode(train), encode(validation)};
  };

  CurriculumConfig cc;
  cc.train = t;
  cc.curriculum = cfg.curriculum.kind;
  for (std::size_t i = 0; i < cfg.data.monolingual.size(); ++i) {
    cc.phase1.push_back(split_and_encode(cfg.data.monolingual[i].path, cfg.data.monolingual[i].origin, 10 + i));
  }
  // Code-mixed labels are read only in supervised mode.
  if (cfg.curriculum.mode == LearningMode::supervised) {
    cc.phase2 = split_and_encode(*cfg.data.codemixed_train, Origin::cm, 1);
  }

  const int dim = static_cast<int>(emb.dim());
  const auto model = sentence_path ? ClassifierModel::sentence_model(dim, t.seed, cfg.model.dropout)
                                   : ClassifierModel::token_model(dim, cfg.model.units, t.seed, cfg.model.dropout);
  auto run = run_curriculum(model, cc, cfg.curriculum.mode);
  save_checkpoint(run.model, out / "model.ckpt");
  run.history.write_jsonl(out / "history.jsonl");
  outputs.push_back(out / "model.ckpt");
  outputs.push_back(out / "history.jsonl");

  PipelineResult result{run.model, run.history, std::nullopt, std::nullopt, out};
  if (evaluate) {
    const auto test = load_dataset(*cfg.data.test, Origin::cm);
    if (test.empty()) throw Error("test set " + cfg.data.test->string() + " is empty");
    inputs.push_back(*cfg.data.test);
    const auto pred = predict(run.model, encode(test));
    const auto cm = confusion(labels_of(test), pred);
    const auto report = f1_report(cm);
    write_text(out / "metrics.json", report_to_json(cm, report).dump(2) + "\n");
    write_text(out / "metrics.txt", report_to_table(cm, report));
    outputs.push_back(out / "metrics.json");
    outputs.push_back(out / "metrics.txt");
    result.confusion = cm;
    result.report = report;
  }
  write_manifest(out, evaluate ? "pipeline run" : "train", cfg.to_json(), inputs, outputs);
  return result;
}

EvalResult cmd_eval(const fs::path& model_path, const fs::path& dataset, Origin origin, const fs::path& embedding,
                    const fs::path& out_dir, bool overwrite) {
  const auto model = load_checkpoint(model_path);
  const auto examples = load_dataset(dataset, origin);
  if (examples.empty()) throw Error("dataset " + dataset.string() + " is empty");

  std::vector<Label> pred;
  std::vector<fs::path> inputs{model_path, dataset};
  if (model.kind == EncoderKind::identity) {
    const auto vectors = load_embeddings(embedding);
    inputs.push_back(embedding);
    if (static_cast<int>(vectors.dim()) != model.input_dim) {
      throw DimensionError("sentence vectors have dimension " + std::to_string(vectors.dim()) + " but the model expects " +
                           std::to_string(model.input_dim));
    }
    pred = predict(model, encode_sentence_vectors(examples, vectors));
  } else {
    const auto emb = load_embedding_artifact(embedding);
    if (emb.subword) {
      for (const char* s : {".words.vec", ".ngrams.vec", ".meta.json"}) inputs.push_back(with_suffix(embedding, s));
    } else {
      inputs.push_back(embedding);
    }
    if (static_cast<int>(emb.dim()) != model.input_dim) {
      throw DimensionError("embedding has dimension " + std::to_string(emb.dim()) + " but the model expects " +
                           std::to_string(model.input_dim));
    }
    pred = predict(model, examples, emb.vectorizer());
  }
  const auto cm = confusion(labels_of(examples), pred);
  const auto report = f1_report(cm);
  const fs::path out = resolve_output_dir(out_dir);
  prepare_output_dir(out, overwrite);
  write_text(out / "metrics.json", report_to_json(cm, report).dump(2) + "\n");
  write_text(out / "metrics.txt", report_to_table(cm, report));
  write_manifest(out, "eval", {{"origin", origin_name(origin)}}, inputs,
                 std::vector<fs::path>{out / "metrics.json", out / "metrics.txt"});
  return {cm, report};
}

}  // namespace cmsent

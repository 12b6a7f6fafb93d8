#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cmsent/error.hpp"
#include "cmsent/pipeline.hpp"

using namespace cmsent;

namespace {

void print_report(const EvalResult& r) { std::cout << report_to_table(r.confusion, r.report); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Code-mixed sentiment analysis with cross-lingual embeddings"};
  app.require_subcommand(1);
  bool overwrite = false;
  app.add_flag("--overwrite", overwrite, "Reuse a nonempty output directory");

  // embed-train
  auto* embed = app.add_subcommand("embed-train", "Train subword skip-gram embeddings on concatenated corpora");
  EmbedTrainOptions eopt;
  std::string embed_out;
  std::string oov_reduce = "sum";
  embed->add_option("--corpus", eopt.corpora, "Corpus file, one sentence per line (repeatable)")->required();
  embed->add_option("--out-dir", embed_out, "Output directory")->required();
  embed->add_option("--dim", eopt.skipgram.dim, "Vector dimension")->capture_default_str();
  embed->add_option("--window", eopt.skipgram.window, "Context window")->capture_default_str();
  embed->add_option("--negatives", eopt.skipgram.negatives, "Negative samples")->capture_default_str();
  embed->add_option("--epochs", eopt.skipgram.epochs, "Epochs")->capture_default_str();
  embed->add_option("--lr", eopt.skipgram.initial_lr, "Initial learning rate")->capture_default_str();
  embed->add_option("--min-count", eopt.skipgram.min_count, "Minimum word count")->capture_default_str();
  embed->add_option("--subsample", eopt.skipgram.subsample_t, "Subsampling threshold")->capture_default_str();
  embed->add_option("--seed", eopt.skipgram.seed, "Random seed")->capture_default_str();
  embed->add_option("--minn", eopt.ngrams.n_min, "Shortest character n-gram")->capture_default_str();
  embed->add_option("--maxn", eopt.ngrams.n_max, "Longest character n-gram")->capture_default_str();
  embed->add_option("--buckets", eopt.ngrams.buckets, "N-gram hash buckets")->capture_default_str();
  embed->add_option("--oov-reduce", oov_reduce, "OOV composition")->check(CLI::IsMember({"sum", "mean"}));

  // align
  auto* align = app.add_subcommand("align", "Map a source space onto a target space and merge them");
  AlignOptions aopt;
  std::string method = "adversarial";
  std::string dict;
  std::string align_out;
  align->add_option("--src", aopt.source, "Source embeddings (.vec)")->required();
  align->add_option("--tgt", aopt.target, "Target embeddings (.vec)")->required();
  align->add_option("--method", method, "procrustes or adversarial")
      ->check(CLI::IsMember({"procrustes", "adversarial"}))
      ->capture_default_str();
  align->add_option("--dict", dict, "Bilingual dictionary (TSV)");
  align->add_option("--refine-iters", aopt.refine_iters, "Procrustes refinement iterations")->capture_default_str();
  align->add_option("--out-dir", align_out, "Output directory")->required();
  align->add_option("--seed", aopt.adversarial.seed, "Random seed")->capture_default_str();
  align->add_option("--steps", aopt.adversarial.steps, "Adversarial steps")->capture_default_str();
  align->add_option("--hidden", aopt.adversarial.discriminator_hidden, "Discriminator width")->capture_default_str();
  align->add_option("--map-lr", aopt.adversarial.map_lr, "Mapping learning rate")->capture_default_str();
  align->add_option("--dis-lr", aopt.adversarial.lr, "Discriminator learning rate")->capture_default_str();
  align->add_option("--beta", aopt.adversarial.ortho_beta, "Orthogonalization beta")->capture_default_str();
  align->add_option("--restarts", aopt.adversarial.restarts, "Independent adversarial runs")->capture_default_str();

  // merge
  auto* merge = app.add_subcommand("merge", "Merge two aligned spaces by averaging shared words");
  std::string merge_a, merge_b, merge_out;
  merge->add_option("a", merge_a, "First space (.vec)")->required();
  merge->add_option("b", merge_b, "Second space (.vec)")->required();
  merge->add_option("--out-dir", merge_out, "Output directory")->required();

  // train / pipeline run
  auto* train = app.add_subcommand("train", "Run the curriculum from a pipeline config");
  std::string train_config;
  train->add_option("--config", train_config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  auto* pipeline = app.add_subcommand("pipeline", "Whole pipelines");
  pipeline->require_subcommand(1);
  auto* run = pipeline->add_subcommand("run", "Embed, align, train and evaluate from one config");
  std::string run_config;
  run->add_option("--config", run_config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);

  // eval
  auto* eval = app.add_subcommand("eval", "Score a trained model on a labeled dataset");
  std::string eval_model, eval_data, eval_embedding, eval_out, eval_origin = "cm";
  eval->add_option("--model", eval_model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Dataset (TSV)")->required()->check(CLI::ExistingFile);
  eval->add_option("--embedding", eval_embedding, "Embedding .vec file or subword-space prefix")->required();
  eval->add_option("--origin", eval_origin, "Dataset origin tag")->capture_default_str();
  eval->add_option("--out-dir", eval_out, "Output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic bilingual benchmark");
  std::string synth_config, synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--config", synth_config, "Synth settings (JSON)")->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "Override the seed");
  synth->add_option("--out-dir", synth_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*embed) {
      eopt.ngrams.oov_reduce = oov_reduce == "mean" ? OovReduce::mean : OovReduce::sum;
      const auto r = cmd_embed_train(eopt, resolve_output_dir(embed_out), overwrite);
      std::cout << "vocabulary " << r.vocab_size << " dim " << r.dim << "\n";
    } else if (*align) {
      aopt.method = parse_align_method(method);
      if (!dict.empty()) aopt.dictionary = dict;
      const auto r = cmd_align(aopt, resolve_output_dir(align_out), overwrite);
      std::cout << "merged vocabulary " << r.merged.size() << " orthogonality error "
                << orthogonality_error(r.map.matrix) << "\n";
    } else if (*merge) {
      const auto m = cmd_merge(merge_a, merge_b, resolve_output_dir(merge_out), overwrite);
      std::cout << "merged vocabulary " << m.size() << " dim " << m.dim() << "\n";
    } else if (*train) {
      const auto r = cmd_train(PipelineConfig::load(train_config), false, overwrite);
      std::cout << r.history.to_jsonl();
    } else if (*run) {
      const auto r = cmd_train(PipelineConfig::load(run_config), true, overwrite);
      std::cout << report_to_table(*r.confusion, *r.report);
    } else if (*eval) {
      print_report(cmd_eval(eval_model, eval_data, parse_origin(eval_origin), eval_embedding, eval_out, overwrite));
    } else if (*synth) {
      SynthOptions opt = synth_config.empty() ? SynthOptions{} : SynthOptions::from_json(read_json(synth_config));
      if (synth_seed) opt.seed = *synth_seed;
      const auto b = cmd_synth(opt, resolve_output_dir(synth_out), overwrite);
      std::cout << "vocabulary " << b.config.vocabulary.size() << " train " << b.train.size() << " test "
                << b.test.size() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

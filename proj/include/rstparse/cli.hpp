#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rstparse/chart.hpp"
#include "rstparse/checkpoint.hpp"
#include "rstparse/data.hpp"
#include "rstparse/eval.hpp"
#include "rstparse/training.hpp"
#include "rstparse/transition.hpp"

namespace rstparse {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitConfigError = 2;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat `key = value` lines; blank lines and `#` comments are skipped.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text,
                                                                          const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline void apply_config(TrainConfig& cfg, const std::string& key, const std::string& value,
                         const std::string& where) {
  try {
    set_config(cfg, key, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

namespace detail {

inline std::string flag_name(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct TrainArgs {
  std::string corpus, out, config;
  std::map<std::string, std::string> flags;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg;
  if (!a.config.empty()) {
    std::string text;
    try {
      text = read_file(a.config);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    for (const auto& [k, v] : parse_config_text(text, a.config)) apply_config(cfg, k, v, a.config);
  }
  for (const auto& [k, v] : a.flags) apply_config(cfg, k, v, flag_name(k));
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  Corpus corpus = load_corpus(a.corpus);
  if (corpus.documents.empty()) throw DataError(DataErrorKind::Io, a.corpus, 0, 0, "corpus has no documents");
  if (corpus.relations.size() < 2) throw DataError(DataErrorKind::Syntax, a.corpus, 0, 0, "manifest lists no relations");
  if (cfg.dev_size >= corpus.documents.size())
    throw ConfigError("dev_size " + std::to_string(cfg.dev_size) + " must be smaller than the corpus (" +
                      std::to_string(corpus.documents.size()) + " documents)");
  Split split = split_train_dev(corpus.documents, cfg.dev_size, cfg.seed);
  // Without a held-out set, selection runs on the training documents.
  if (split.dev.empty()) split.dev = split.train;

  Model model = build_model(split.train, corpus.relations, cfg);
  out << "train " << split.train.size() << " docs, dev " << split.dev.size() << " docs, mode " << to_string(cfg.mode)
      << ", decoder " << to_string(cfg.decoder) << '\n';
  TrainResult result = train(std::move(model), split.train, split.dev, cfg, &out);

  save_model(a.out, result.best);
  std::ostringstream text, table;
  write_report_text(text, result.epochs);
  text << "best epoch " << result.best_epoch << '\n';
  write_report_table(table, result.epochs);
  write_file(a.out + ".report.txt", text.str());
  write_file(a.out + ".report.tsv", table.str());
  out << "best epoch " << result.best_epoch << "; model written to " << a.out << '\n';
  return kExitOk;
}

struct ParseArgs {
  std::string model, decoder = "partial", out_dir = ".";
  std::vector<std::string> inputs;
};

inline int cmd_parse(const ParseArgs& a, std::ostream& out, std::ostream& err) {
  const auto parser = parse_parser(a.decoder);
  if (!parser) throw ConfigError("unknown decoder '" + a.decoder + "'");
  const Model model = load_model(a.model);
  std::filesystem::create_directories(a.out_dir);
  for (const auto& input : a.inputs) {
    const std::filesystem::path path(input);
    Document doc{path.stem().string(), parse_edus(read_file(path), path.string()), std::nullopt};
    if (doc.edus.empty()) throw DataError(DataErrorKind::Syntax, path.string(), 0, 0, "document has no EDUs");
    const ParseResult r = parse_with(model, doc, *parser);
    const std::filesystem::path target = std::filesystem::path(a.out_dir) / (doc.doc_id + ".tree");
    write_file(target, serialize_tree(r.tree, model.relations));
    err << doc.doc_id << '\t' << to_string(*parser) << '\t' << fixed(r.score, 6) << '\n';
    out << target.string() << '\n';
  }
  return kExitOk;
}

struct EvalArgs {
  std::string gold, pred, rows;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  Corpus gold = load_corpus(a.gold);
  if (gold.documents.empty()) throw DataError(DataErrorKind::Io, a.gold, 0, 0, "gold corpus has no documents");
  std::vector<std::string> missing;
  for (const auto& d : gold.documents)
    if (!std::filesystem::exists(std::filesystem::path(a.pred) / (d.doc_id + ".tree"))) missing.push_back(d.doc_id);
  if (!missing.empty()) {
    err << "missing predictions for " << missing.size() << " document(s):";
    for (const auto& id : missing) err << ' ' << id;
    err << '\n';
    return kExitDataError;
  }
  std::vector<PairCounts> counts;
  std::vector<std::string> ids;
  for (const auto& d : gold.documents) {
    const auto path = std::filesystem::path(a.pred) / (d.doc_id + ".tree");
    const RstTree pred = parse_tree(read_file(path), gold.relations, false, path.string());
    if (pred.num_edus() != d.num_edus())
      throw DataError(DataErrorKind::EduCountMismatch, path.string(), 0, 0,
                      "prediction covers " + std::to_string(pred.num_edus()) + " EDUs, gold has " +
                          std::to_string(d.num_edus()));
    counts.push_back(score_pair(pred, *d.gold));
    ids.push_back(d.doc_id);
  }
  print_report(out, aggregate(counts));
  if (!a.rows.empty()) {
    std::ostringstream rows;
    print_rows(rows, ids, counts);
    write_file(a.rows, rows.str());
  }
  return kExitOk;
}

struct OracleArgs {
  std::string tree, manifest;
  bool replay = false;
};

inline int cmd_oracle(const OracleArgs& a, std::ostream& out, std::ostream& err) {
  RelationVocab rels;
  const bool extend = a.manifest.empty();
  if (!extend) rels = parse_manifest(read_file(a.manifest), a.manifest);
  const RstTree tree = parse_tree(read_file(a.tree), rels, extend, a.tree);
  const std::string text = format_derivation(oracle_actions(tree), rels);
  out << text << '\n';
  if (a.replay) {
    const RstTree back = replay(tree.num_edus(), parse_derivation(text, rels));
    if (!(back == tree)) {
      err << "replay: reconstructed tree differs from " << a.tree << '\n';
      return kExitDataError;
    }
    err << "replay: ok (" << 2 * tree.num_edus() - 1 << " actions)\n";
  }
  return kExitOk;
}

struct CompareArgs {
  std::string model, corpus;
  std::vector<std::string> decoders{"exact", "partial", "complete"};
  bool timing = true;
};

inline int cmd_compare(const CompareArgs& a, std::ostream& out) {
  std::vector<Decoder> decoders;
  for (const auto& name : a.decoders) {
    auto d = parse_decoder(name);
    if (!d) throw ConfigError("unknown decoder '" + name + "'");
    decoders.push_back(*d);
  }
  const Model model = load_model(a.model);
  const Corpus corpus = load_corpus(a.corpus);
  if (corpus.documents.empty()) throw DataError(DataErrorKind::Io, a.corpus, 0, 0, "corpus has no documents");
  if (!(corpus.relations == model.relations))
    throw DataError(DataErrorKind::UnknownRelation, a.corpus, 0, 0, "corpus relations differ from the model's");

  struct Row {
    double gold = 0.0;
    std::vector<double> score;
    std::vector<int> missing;
    std::vector<double> millis;
  };
  std::vector<Row> rows(corpus.documents.size());
  std::vector<std::vector<PairCounts>> counts(decoders.size());
  std::vector<int> missing_total(decoders.size(), 0);
  std::vector<double> millis_total(decoders.size(), 0.0);
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const Document& doc = corpus.documents[d];
    const EncodedDocument enc = encode_document(model, index_document(model, doc));
    const NeuralScores scores(model, enc);
    const double gold = score_tree(*doc.gold, scores);
    rows[d].gold = gold;
    for (std::size_t k = 0; k < decoders.size(); ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      const DecodeResult r = decode(decoders[k], doc.num_edus(), scores);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      const int miss = score_tree(r.tree, scores) < gold ? 1 : 0;
      rows[d].score.push_back(r.score);
      rows[d].missing.push_back(miss);
      rows[d].millis.push_back(ms);
      missing_total[k] += miss;
      millis_total[k] += ms;
      counts[k].push_back(score_pair(r.tree, *doc.gold));
    }
  }

  out << "doc_id\tgold_score";
  for (Decoder d : decoders) {
    const std::string n(to_string(d));
    out << '\t' << n << "_score\t" << n << "_missing";
    if (a.timing) out << '\t' << n << "_ms";
  }
  out << '\n';
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    out << corpus.documents[d].doc_id << '\t' << fixed(rows[d].gold, 6);
    for (std::size_t k = 0; k < decoders.size(); ++k) {
      out << '\t' << fixed(rows[d].score[k], 6) << '\t' << rows[d].missing[k];
      if (a.timing) out << '\t' << fixed(rows[d].millis[k], 3);
    }
    out << '\n';
  }
  out << '\n';
  for (std::size_t k = 0; k < decoders.size(); ++k) {
    out << "decoder " << to_string(decoders[k]) << ": missing " << missing_total[k] << '/'
        << corpus.documents.size();
    if (a.timing) out << ", time " << fixed(millis_total[k], 3) << " ms";
    out << '\n';
    print_report(out, aggregate(counts[k]));
  }
  return kExitOk;
}

struct GenerateArgs {
  std::string out;
  int docs = 8;
  int max_edus = 6;
  int relations = 4;
  std::uint64_t seed = 1;
};

inline int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  if (a.docs < 0 || a.max_edus < 1 || a.relations < 1)
    throw ConfigError("generate needs docs >= 0, max-edus >= 1 and relations >= 1");
  RelationVocab rels;
  for (int r = 1; r <= a.relations; ++r) rels.add("rel" + std::to_string(r));
  write_corpus(a.out, generate_synthetic(a.docs, a.max_edus, rels, a.seed));
  out << "wrote " << a.docs << " documents to " << a.out << '\n';
  return kExitOk;
}

}  // namespace detail

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"RST discourse parser: chart and shift-reduce decoding over a shared bi-LSTM encoder", "rstparse"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  bool seed_given = false;

  detail::TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model on a corpus directory");
  train_cmd->add_option("--corpus", train_args.corpus, "corpus directory (manifest.txt, *.edus, *.tree)")->required();
  train_cmd->add_option("--out", train_args.out, "checkpoint path; reports go to <out>.report.{txt,tsv}")->required();
  train_cmd->add_option("--config", train_args.config, "file of key = value lines");
  std::map<std::string, std::string> flag_values;
  for (const auto& key : config_keys())
    if (key != "seed") train_cmd->add_option(detail::flag_name(key), flag_values[key], "overrides config key " + key);

  detail::ParseArgs parse_args;
  auto* parse_cmd = app.add_subcommand("parse", "parse .edus files with a trained model");
  parse_cmd->add_option("--model", parse_args.model, "checkpoint")->required();
  parse_cmd->add_option("--decoder", parse_args.decoder, "exact | partial | complete | transition");
  parse_cmd->add_option("--out-dir", parse_args.out_dir, "directory for the .tree outputs");
  parse_cmd->add_option("inputs", parse_args.inputs, ".edus files")->required();

  detail::EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score predicted trees against a gold corpus");
  eval_cmd->add_option("--gold", eval_args.gold, "gold corpus directory")->required();
  eval_cmd->add_option("--pred", eval_args.pred, "directory of predicted <doc_id>.tree files")->required();
  eval_cmd->add_option("--rows", eval_args.rows, "write per-document rows (tab separated) here");

  detail::OracleArgs oracle_args;
  auto* oracle_cmd = app.add_subcommand("oracle", "print the shift-reduce derivation of a tree");
  oracle_cmd->add_option("tree", oracle_args.tree, ".tree file")->required();
  oracle_cmd->add_option("--manifest", oracle_args.manifest, "relation manifest; labels are taken from the tree if absent");
  oracle_cmd->add_flag("--replay", oracle_args.replay, "replay the derivation and check it rebuilds the tree");

  detail::CompareArgs compare_args;
  bool no_timing = false;
  auto* compare_cmd = app.add_subcommand("compare", "compare chart decoders on a corpus");
  compare_cmd->add_option("--model", compare_args.model, "checkpoint")->required();
  compare_cmd->add_option("--corpus", compare_args.corpus, "corpus directory with gold trees")->required();
  compare_cmd->add_option("--decoders", compare_args.decoders, "decoders to run")->delimiter(',');
  compare_cmd->add_flag("--no-timing", no_timing, "omit wall-clock columns");

  detail::GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic corpus");
  gen_cmd->add_option("--out", gen_args.out, "output directory")->required();
  gen_cmd->add_option("--docs", gen_args.docs, "number of documents");
  gen_cmd->add_option("--max-edus", gen_args.max_edus, "maximum EDUs per document");
  gen_cmd->add_option("--relations", gen_args.relations, "number of relation labels");

  for (auto* cmd : {train_cmd, parse_cmd, eval_cmd, oracle_cmd, compare_cmd, gen_cmd})
    cmd->add_option("--seed", seed, "random seed")->each([&](const std::string&) { seed_given = true; });

  std::vector<std::string> argv_store{"rstparse"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (train_cmd->parsed()) {
      for (const auto& key : config_keys())
        if (key != "seed" && train_cmd->count(detail::flag_name(key)) > 0) train_args.flags[key] = flag_values[key];
      if (seed_given) train_args.flags["seed"] = std::to_string(seed);
      return detail::cmd_train(train_args, out);
    }
    if (parse_cmd->parsed()) return detail::cmd_parse(parse_args, out, err);
    if (eval_cmd->parsed()) return detail::cmd_eval(eval_args, out, err);
    if (oracle_cmd->parsed()) return detail::cmd_oracle(oracle_args, out, err);
    if (compare_cmd->parsed()) {
      compare_args.timing = !no_timing;
      return detail::cmd_compare(compare_args, out);
    }
    if (gen_cmd->parsed()) {
      gen_args.seed = seed;
      return detail::cmd_generate(gen_args, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitConfigError;
}

}  // namespace rstparse

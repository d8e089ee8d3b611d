#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rstparse/autodiff.hpp"
#include "rstparse/chart.hpp"
#include "rstparse/core.hpp"
#include "rstparse/data.hpp"
#include "rstparse/encoder.hpp"
#include "rstparse/eval.hpp"
#include "rstparse/model.hpp"
#include "rstparse/transition.hpp"

namespace rstparse {

enum class TrainMode { Chart, Transition, Joint };

inline std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Chart: return "chart";
    case TrainMode::Transition: return "transition";
    case TrainMode::Joint: return "joint";
  }
  return "?";
}

inline std::optional<TrainMode> parse_train_mode(std::string_view s) {
  if (s == "chart") return TrainMode::Chart;
  if (s == "transition") return TrainMode::Transition;
  if (s == "joint") return TrainMode::Joint;
  return std::nullopt;
}

// Which parser produces trees: one of the chart decoders or the greedy
// shift-reduce parser.
enum class Parser { Exact, Partial, Complete, Transition };

inline std::string_view to_string(Parser p) {
  switch (p) {
    case Parser::Exact: return "exact";
    case Parser::Partial: return "partial";
    case Parser::Complete: return "complete";
    case Parser::Transition: return "transition";
  }
  return "?";
}

inline std::optional<Parser> parse_parser(std::string_view s) {
  if (s == "transition") return Parser::Transition;
  if (auto d = parse_decoder(s)) return static_cast<Parser>(static_cast<int>(*d));
  return std::nullopt;
}

inline Parser to_parser(Decoder d) { return static_cast<Parser>(static_cast<int>(d)); }
inline Decoder to_decoder(Parser p) {
  if (p == Parser::Transition) throw std::invalid_argument("the transition parser is not a chart decoder");
  return static_cast<Decoder>(static_cast<int>(p));
}

struct TrainConfig {
  int max_epochs = 15;
  double learning_rate = 0.001;
  double dropout = 0.2;
  std::size_t lstm_hidden = 200;
  std::size_t ff_hidden = 200;
  std::size_t word_dim = 300;
  std::size_t pos_dim = 300;
  double gamma = 1.0;
  TrainMode mode = TrainMode::Chart;
  Decoder decoder = Decoder::Partial;
  std::string eval_parser = "auto";  // auto | exact | partial | complete | transition
  Metric selection = Metric::Relation;
  double clip_norm = 0.0;  // 0 disables clipping
  std::uint64_t seed = 1;
  std::size_t dev_size = 47;
  std::string embeddings;  // optional GloVe-style text file

  ModelDims dims(int num_relations, std::size_t pretrained_dim = 0) const {
    return {word_dim, pos_dim, pretrained_dim, lstm_hidden, ff_hidden, num_relations};
  }

  // Parser used for dev selection and reported F1.
  Parser evaluation_parser() const {
    if (eval_parser != "auto") {
      auto p = parse_parser(eval_parser);
      if (!p) throw std::invalid_argument("unknown eval_parser " + eval_parser);
      return *p;
    }
    return mode == TrainMode::Transition ? Parser::Transition : to_parser(decoder);
  }

  void validate() const {
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
    if (lstm_hidden == 0 || ff_hidden == 0 || word_dim + pos_dim == 0)
      throw std::invalid_argument("dimensions must be positive");
    if (clip_norm < 0.0) throw std::invalid_argument("clip_norm must be >= 0");
    evaluation_parser();
  }
};

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{"max_epochs", "learning_rate", "dropout",   "lstm_hidden", "ff_hidden",
                                             "word_dim",   "pos_dim",       "gamma",     "mode",        "decoder",
                                             "eval_parser", "selection",    "clip_norm", "seed",        "dev_size",
                                             "embeddings"};
  return keys;
}

// Sets one field from its textual form. Throws std::invalid_argument on an
// unknown key or unparseable value.
inline void set_config(TrainConfig& c, const std::string& key, const std::string& value) {
  auto bad = [&]() -> std::invalid_argument { return std::invalid_argument("bad value '" + value + "' for " + key); };
  auto to_int = [&]() {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(value, &used);
    } catch (...) {
      throw bad();
    }
    if (used != value.size()) throw bad();
    return v;
  };
  auto to_size = [&]() {
    const auto v = to_int();
    if (v < 0) throw bad();
    return static_cast<std::size_t>(v);
  };
  auto to_double = [&]() {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(value, &used);
    } catch (...) {
      throw bad();
    }
    if (used != value.size()) throw bad();
    return v;
  };
  if (key == "max_epochs") c.max_epochs = static_cast<int>(to_int());
  else if (key == "learning_rate") c.learning_rate = to_double();
  else if (key == "dropout") c.dropout = to_double();
  else if (key == "lstm_hidden") c.lstm_hidden = to_size();
  else if (key == "ff_hidden") c.ff_hidden = to_size();
  else if (key == "word_dim") c.word_dim = to_size();
  else if (key == "pos_dim") c.pos_dim = to_size();
  else if (key == "gamma") c.gamma = to_double();
  else if (key == "mode") {
    auto m = parse_train_mode(value);
    if (!m) throw bad();
    c.mode = *m;
  } else if (key == "decoder") {
    auto d = parse_decoder(value);
    if (!d) throw bad();
    c.decoder = *d;
  } else if (key == "eval_parser") {
    if (value != "auto" && !parse_parser(value)) throw bad();
    c.eval_parser = value;
  } else if (key == "selection") {
    if (value == "span") c.selection = Metric::Span;
    else if (value == "nuclearity") c.selection = Metric::Nuclearity;
    else if (value == "relation") c.selection = Metric::Relation;
    else throw bad();
  } else if (key == "clip_norm") c.clip_norm = to_double();
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int());
  else if (key == "dev_size") c.dev_size = to_size();
  else if (key == "embeddings") c.embeddings = value;
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

// Vocabularies from the training documents, optional frozen pretrained table,
// seeded initialization.
inline Model build_model(const std::vector<Document>& train_docs, const RelationVocab& relations,
                         const TrainConfig& cfg) {
  auto [words, tags] = build_vocabularies(train_docs);
  std::optional<EmbeddingTable> table;
  if (!cfg.embeddings.empty()) table = load_embeddings(std::filesystem::path(cfg.embeddings), words);
  Model m = make_model(cfg.dims(relations.size(), table ? table->dim : 0), std::move(words), std::move(tags),
                       relations, cfg.seed);
  if (table) m.params.pretrained = std::move(table->table);
  return m;
}

// ---- losses -------------------------------------------------------------------

struct JointLoss {
  Var loss;
  double value = 0.0;
  double chart = 0.0;
  double transition = 0.0;
  std::optional<ChartLoss> chart_detail;
};

// One shared encoding feeds both objectives: ℓ_chart + γ ℓ_sr in joint mode.
inline JointLoss joint_loss(Tape& tape, Model& m, const IndexedDocument& doc, const RstTree& gold,
                            const TrainConfig& cfg, const DropoutMasks* masks = nullptr) {
  const TapedEncoding enc = encode_document(tape, m, doc, masks);
  JointLoss out;
  std::vector<Var> parts;
  if (cfg.mode != TrainMode::Transition) {
    ChartLoss c = chart_loss(tape, m, enc, gold, cfg.decoder, masks);
    out.chart = c.value;
    parts.push_back(c.loss);
    out.chart_detail = std::move(c);
  }
  if (cfg.mode != TrainMode::Chart) {
    TransitionLoss t = transition_loss(tape, m, enc, gold, masks);
    out.transition = t.value;
    parts.push_back(cfg.mode == TrainMode::Joint ? tape.scale(t.loss, cfg.gamma) : t.loss);
  }
  out.loss = parts.size() == 1 ? parts[0] : tape.sum(parts);
  out.value = tape.scalar(out.loss);
  return out;
}

inline double joint_loss(Model& m, const Document& doc, const TrainConfig& cfg) {
  if (!doc.gold) throw std::invalid_argument("joint_loss: document " + doc.doc_id + " has no gold tree");
  Tape tape;
  return joint_loss(tape, m, index_document(m, doc), *doc.gold, cfg).value;
}

// ---- Adam ---------------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Vec> first, second;

  AdamState() = default;
  explicit AdamState(const std::vector<Parameter*>& params) {
    for (const Parameter* p : params) {
      first.emplace_back(p->size(), 0.0);
      second.emplace_back(p->size(), 0.0);
    }
  }
  explicit AdamState(ModelParams& p) : AdamState(parameter_list(p)) {}

  static std::vector<Parameter*> parameter_list(ModelParams& p) {
    std::vector<Parameter*> out;
    p.for_each([&](Parameter& t) { out.push_back(&t); });
    return out;
  }
};

// Bias-corrected Adam on every trainable tensor, reading Parameter::grad.
inline void adam_step(const std::vector<Parameter*>& params, AdamState& state, double lr) {
  if (params.size() != state.first.size()) throw std::invalid_argument("adam_step: optimizer state does not match");
  for (std::size_t idx = 0; idx < params.size(); ++idx) {
    const Parameter& p = *params[idx];
    if (state.first[idx].size() != p.size())
      throw std::invalid_argument("adam_step: optimizer state does not match parameter " + p.name);
    if (!p.trainable) continue;
    for (std::size_t a = 0; a < p.grad.size(); ++a)
      if (!std::isfinite(p.grad[a]))
        throw std::runtime_error("adam_step: non-finite gradient in " + p.name + " at element " + std::to_string(a));
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t idx = 0; idx < params.size(); ++idx) {
    Parameter& p = *params[idx];
    if (!p.trainable) continue;
    auto& m = state.first[idx];
    auto& v = state.second[idx];
    for (std::size_t a = 0; a < p.size(); ++a) {
      const double g = p.grad[a];
      m[a] = state.beta1 * m[a] + (1.0 - state.beta1) * g;
      v[a] = state.beta2 * v[a] + (1.0 - state.beta2) * g * g;
      p.value[a] -= lr * (m[a] / c1) / (std::sqrt(v[a] / c2) + state.epsilon);
    }
    for (double x : p.value)
      if (!std::isfinite(x)) throw std::runtime_error("adam_step: parameter " + p.name + " became non-finite");
  }
}

inline void adam_step(ModelParams& params, AdamState& state, double lr) {
  adam_step(AdamState::parameter_list(params), state, lr);
}

inline double grad_norm(const ModelParams& p) {
  double sq = 0.0;
  p.for_each([&](const Parameter& t) {
    if (t.trainable)
      for (double g : t.grad) sq += g * g;
  });
  return std::sqrt(sq);
}

inline void clip_gradients(ModelParams& p, double max_norm) {
  const double norm = grad_norm(p);
  if (max_norm <= 0.0 || norm <= max_norm) return;
  const double s = max_norm / norm;
  p.for_each([&](Parameter& t) {
    for (double& g : t.grad) g *= s;
  });
}

// ---- parsing, evaluation, diagnostics -----------------------------------------

struct ParseResult {
  RstTree tree;
  double score = 0.0;  // plain chart score of the tree (also for the greedy parser)
};

inline ParseResult parse_with(const Model& m, const Document& doc, Parser p) {
  const EncodedDocument enc = encode_document(m, index_document(m, doc));
  const NeuralScores scores(m, enc);
  ParseResult r;
  if (p == Parser::Transition) {
    r.tree = greedy_parse(enc, m);
    r.score = score_tree(r.tree, scores);
  } else {
    DecodeResult d = decode(to_decoder(p), enc.num_edus(), scores);
    r.score = d.score;
    r.tree = std::move(d.tree);
  }
  return r;
}

inline std::vector<PairCounts> score_documents(const Model& m, const std::vector<Document>& docs, Parser p) {
  std::vector<PairCounts> out;
  for (const auto& d : docs) {
    if (!d.gold) throw std::invalid_argument("evaluation: document " + d.doc_id + " has no gold tree");
    out.push_back(score_pair(parse_with(m, d, p).tree, *d.gold));
  }
  return out;
}

inline EvalReport evaluate(const Model& m, const std::vector<Document>& docs, Parser p) {
  return aggregate(score_documents(m, docs, p));
}

// Documents whose plain decode scores strictly below their gold tree.
inline int count_missing(const std::vector<Document>& docs, const Model& m, Decoder d) {
  int missing = 0;
  for (const auto& doc : docs) {
    if (!doc.gold) throw std::invalid_argument("count_missing: document " + doc.doc_id + " has no gold tree");
    const EncodedDocument enc = encode_document(m, index_document(m, doc));
    const NeuralScores scores(m, enc);
    if (is_missing_prediction(scores, *doc.gold, d)) ++missing;
  }
  return missing;
}

// ---- training loop ------------------------------------------------------------

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-document loss
  std::array<double, 3> train_micro{};
  std::array<double, 3> dev_micro{};
  std::array<double, 3> dev_macro{};
  int missing = 0;  // chart-decoder missing predictions on the training set
};

struct TrainResult {
  Model best;
  int best_epoch = 0;
  std::vector<EpochRow> epochs;
};

inline std::string format_loss(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Machine-readable, tab separated.
inline void write_report_table(std::ostream& out, const std::vector<EpochRow>& rows) {
  out << "epoch\ttrain_loss\ttrain_S\ttrain_N\ttrain_R\tdev_S_micro\tdev_N_micro\tdev_R_micro\t"
         "dev_S_macro\tdev_N_macro\tdev_R_macro\tmissing\n";
  for (const auto& r : rows) {
    out << r.epoch << '\t' << format_loss(r.train_loss);
    for (double v : r.train_micro) out << '\t' << format_f1(v);
    for (double v : r.dev_micro) out << '\t' << format_f1(v);
    for (double v : r.dev_macro) out << '\t' << format_f1(v);
    out << '\t' << r.missing << '\n';
  }
}

inline std::string format_epoch_line(const EpochRow& r) {
  std::string s = "epoch " + std::to_string(r.epoch) + "  loss " + format_loss(r.train_loss) + "  train S/N/R " +
                  format_f1(r.train_micro[0]) + "/" + format_f1(r.train_micro[1]) + "/" + format_f1(r.train_micro[2]) +
                  "  dev micro S/N/R " + format_f1(r.dev_micro[0]) + "/" + format_f1(r.dev_micro[1]) + "/" +
                  format_f1(r.dev_micro[2]) + "  dev macro S/N/R " + format_f1(r.dev_macro[0]) + "/" +
                  format_f1(r.dev_macro[1]) + "/" + format_f1(r.dev_macro[2]) + "  missing " +
                  std::to_string(r.missing);
  return s;
}

inline void write_report_text(std::ostream& out, const std::vector<EpochRow>& rows) {
  for (const auto& r : rows) out << format_epoch_line(r) << '\n';
}

// Per-document Adam updates in seeded shuffled order; after each epoch the
// model is evaluated on train and dev and the best dev snapshot is kept
// (earliest epoch on ties). `stop` may end training after any epoch.
inline TrainResult train(Model model, const std::vector<Document>& train_docs, const std::vector<Document>& dev_docs,
                         const TrainConfig& cfg, std::ostream* log = nullptr,
                         const std::function<bool(const EpochRow&)>& stop = {}) {
  cfg.validate();
  if (train_docs.empty()) throw std::invalid_argument("train: no training documents");
  if (dev_docs.empty()) throw std::invalid_argument("train: no development documents");
  for (const auto* set : {&train_docs, &dev_docs})
    for (const auto& d : *set)
      if (!d.gold) throw std::invalid_argument("train: document " + d.doc_id + " has no gold tree");

  std::vector<IndexedDocument> indexed;
  for (const auto& d : train_docs) indexed.push_back(index_document(model, d));

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  AdamState adam(model.params);
  const Parser eval_parser = cfg.evaluation_parser();

  TrainResult result{model, 0, {}};
  double best_key = -1.0;
  std::vector<std::size_t> order(train_docs.size());
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      model.params.zero_grad();
      Tape tape;
      std::optional<DropoutMasks> masks;
      if (cfg.dropout > 0.0) masks = sample_dropout(model.dims, indexed[idx].words.size(), cfg.dropout, dropout_rng);
      const JointLoss loss = joint_loss(tape, model, indexed[idx], *train_docs[idx].gold, cfg, masks ? &*masks : nullptr);
      total += loss.value;
      if (loss.value > 0.0) tape.backward(loss.loss);
      if (cfg.clip_norm > 0.0) clip_gradients(model.params, cfg.clip_norm);
      adam_step(model.params, adam, cfg.learning_rate);
    }
    EpochRow row;
    row.epoch = epoch;
    row.train_loss = total / static_cast<double>(train_docs.size());
    const EvalReport tr = evaluate(model, train_docs, eval_parser);
    const EvalReport dv = evaluate(model, dev_docs, eval_parser);
    row.train_micro = tr.micro;
    row.dev_micro = dv.micro;
    row.dev_macro = dv.macro;
    row.missing = count_missing(train_docs, model, cfg.decoder);
    result.epochs.push_back(row);
    if (log) *log << format_epoch_line(row) << '\n';
    const double key = dv.micro_f1(cfg.selection);
    if (key > best_key) {
      best_key = key;
      result.best_epoch = epoch;
      result.best.params = model.params;
    }
    if (stop && stop(row)) break;
  }
  return result;
}

}  // namespace rstparse

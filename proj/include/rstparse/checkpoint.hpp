#pragma once

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rstparse/data.hpp"
#include "rstparse/model.hpp"

namespace rstparse {

// JSON checkpoint: dimensions, vocabularies, relation labels and every tensor.
// Doubles are written in shortest round-trip form, so save/load is exact.
inline nlohmann::json to_json(const Model& m) {
  nlohmann::json j;
  j["format"] = "rstparse-model-1";
  j["dims"] = {{"word_dim", m.dims.word_dim},           {"pos_dim", m.dims.pos_dim},
               {"pretrained_dim", m.dims.pretrained_dim}, {"lstm_hidden", m.dims.lstm_hidden},
               {"ff_hidden", m.dims.ff_hidden},         {"num_relations", m.dims.num_relations}};
  j["words"] = m.words.tokens();
  j["tags"] = m.tags.tokens();
  j["relations"] = m.relations.labels();
  nlohmann::json tensors = nlohmann::json::object();
  m.params.for_each([&](const Parameter& p) {
    for (double v : p.value)
      if (!std::isfinite(v)) throw std::runtime_error("checkpoint: parameter " + p.name + " is not finite");
    tensors[p.name] = {{"rows", p.rows}, {"cols", p.cols}, {"trainable", p.trainable}, {"value", p.value}};
  });
  j["tensors"] = std::move(tensors);
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "rstparse-model-1") throw std::runtime_error("unsupported checkpoint format");
    const auto& d = j.at("dims");
    ModelDims dims{d.at("word_dim").get<std::size_t>(),    d.at("pos_dim").get<std::size_t>(),
                   d.at("pretrained_dim").get<std::size_t>(), d.at("lstm_hidden").get<std::size_t>(),
                   d.at("ff_hidden").get<std::size_t>(),  d.at("num_relations").get<int>()};
    Model m{dims, Vocabulary::from_tokens(j.at("words").get<std::vector<std::string>>()),
            Vocabulary::from_tokens(j.at("tags").get<std::vector<std::string>>()),
            RelationVocab(j.at("relations").get<std::vector<std::string>>()),
            {}};
    if (m.relations.size() != dims.num_relations)
      throw std::runtime_error("relation labels do not match num_relations");
    m.params = zero_params(dims, m.words.size(), m.tags.size());
    const auto& tensors = j.at("tensors");
    std::size_t seen = 0;
    m.params.for_each([&](Parameter& p) {
      const auto& t = tensors.at(p.name);
      if (t.at("rows").get<std::size_t>() != p.rows || t.at("cols").get<std::size_t>() != p.cols)
        throw std::runtime_error("tensor " + p.name + " has the wrong shape");
      p.value = t.at("value").get<Vec>();
      if (p.value.size() != p.rows * p.cols) throw std::runtime_error("tensor " + p.name + " has the wrong size");
      p.trainable = t.at("trainable").get<bool>();
      p.grad.assign(p.value.size(), 0.0);
      ++seen;
    });
    if (seen != tensors.size()) throw std::runtime_error("checkpoint has unexpected tensors");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const Model& m) { write_file(path, to_json(m).dump()); }

inline Model load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::Syntax, path.string(), 0, 0, std::string("checkpoint is not JSON: ") + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const std::runtime_error& e) {
    throw DataError(DataErrorKind::Syntax, path.string(), 0, 0, e.what());
  }
}

}  // namespace rstparse

// SPDX-License-Identifier: Apache-2.0
#include "eq5d/baselines.hpp"

#include <cctype>
#include <cmath>

#include "eq5d/aggregation.hpp"
#include "eq5d/error.hpp"

namespace eq5d {

std::vector<std::string> bow_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double BowModel::log_prior(Label c) const {
  const int k = to_int(c);
  return std::log(static_cast<double>(n_docs[k]) / static_cast<double>(n_docs[0] + n_docs[1]));
}

double BowModel::log_likelihood(Label c, std::size_t column) const {
  const int k = to_int(c);
  const double v = static_cast<double>(vocabulary.size());
  return std::log((counts[k][column] + alpha) / (total_counts[k] + alpha * v));
}

BowModel bow_train(std::span<const StudyRecord> train, double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("Naive Bayes smoothing alpha must be positive");
  if (train.empty()) throw ValidationError("Naive Bayes training set is empty");
  BowModel m;
  m.alpha = alpha;
  std::vector<std::vector<std::string>> docs;
  docs.reserve(train.size());
  for (const auto& r : train) {
    docs.push_back(bow_tokenize(r.abstract));
    for (const auto& t : docs.back()) m.vocabulary.emplace(t, 0);
  }
  std::size_t col = 0;
  for (auto& [tok, c] : m.vocabulary) c = col++;
  for (auto& c : m.counts) c.assign(m.vocabulary.size(), 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int k = to_int(train[i].label);
    ++m.n_docs[k];
    for (const auto& t : docs[i]) {
      m.counts[k][m.vocabulary.at(t)] += 1.0;
      m.total_counts[k] += 1.0;
    }
  }
  if (m.n_docs[0] == 0 || m.n_docs[1] == 0) throw ValidationError("Naive Bayes training set has a single class");
  return m;
}

BowScores bow_predict(const BowModel& model, std::string_view abstract_text) {
  BowScores s;
  s.log_positive = model.log_prior(Label::positive);
  s.log_negative = model.log_prior(Label::negative);
  for (const auto& t : bow_tokenize(abstract_text)) {
    const auto it = model.vocabulary.find(t);
    if (it == model.vocabulary.end()) continue;
    s.log_positive += model.log_likelihood(Label::positive, it->second);
    s.log_negative += model.log_likelihood(Label::negative, it->second);
  }
  s.label = max_confidence_label(s.log_positive, s.log_negative);
  return s;
}

nlohmann::json to_json(const BowModel& m) {
  nlohmann::json tokens = nlohmann::json::object();
  for (const auto& [tok, col] : m.vocabulary) tokens[tok] = {m.counts[0][col], m.counts[1][col]};
  return {{"alpha", m.alpha}, {"n_docs", {m.n_docs[0], m.n_docs[1]}}, {"token_counts", tokens}};
}

BowModel bow_model_from_json(const nlohmann::json& j) {
  BowModel m;
  m.alpha = j.at("alpha").get<double>();
  m.n_docs[0] = j.at("n_docs").at(0).get<std::size_t>();
  m.n_docs[1] = j.at("n_docs").at(1).get<std::size_t>();
  std::size_t col = 0;
  for (const auto& [tok, c] : j.at("token_counts").items()) {
    m.vocabulary.emplace(tok, col++);
    for (int k = 0; k < 2; ++k) {
      m.counts[k].push_back(c.at(k).get<double>());
      m.total_counts[k] += c.at(k).get<double>();
    }
  }
  return m;
}

}  // namespace eq5d

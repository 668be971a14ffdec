#include "corvid/datagen/ngram.hpp"

#include <cmath>

#include "corvid/common/binary_io.hpp"
#include "corvid/common/error.hpp"
#include "corvid/datagen/tokenize.hpp"

namespace corvid::datagen {

namespace {

constexpr std::string_view kMagic = "CORVLM1";
constexpr char kSep = '\x1f';

std::string join_context(const std::vector<std::string>& padded, std::size_t begin, std::size_t end) {
  std::string key;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) key.push_back(kSep);
    key += padded[i];
  }
  return key;
}

}  // namespace

NgramModel NgramModel::build(const std::vector<std::vector<std::string>>& sentences, int order, double discount) {
  if (order < 1 || order > 5) throw Error(Errc::precondition, "n-gram order must be between 1 and 5");
  if (sentences.empty()) throw Error(Errc::precondition, "cannot build a language model from no sentences");
  if (!(discount > 0 && discount < 1)) throw Error(Errc::precondition, "discount must be in (0, 1)");

  NgramModel m;
  m.order_ = order;
  m.discount_ = discount;
  const auto pad = static_cast<std::size_t>(order - 1);
  for (const auto& sentence : sentences) {
    std::vector<std::string> padded(pad, std::string(kSentenceStart));
    padded.insert(padded.end(), sentence.begin(), sentence.end());
    padded.emplace_back(kSentenceEnd);
    for (std::size_t i = pad; i < padded.size(); ++i) {
      m.vocab_.insert(padded[i]);
      for (std::size_t k = 0; k <= pad; ++k) {
        auto& succ = m.contexts_[join_context(padded, i - k, i)];
        ++succ.counts[padded[i]];
        ++succ.total;
      }
    }
  }
  return m;
}

double NgramModel::prob_at(const std::vector<std::string>& history, std::size_t take, const std::string& token) const {
  const double lower = take == 0 ? 1.0 / static_cast<double>(vocab_.size() + 1)
                                 : prob_at(history, take - 1, token);
  const auto it = contexts_.find(join_context(history, history.size() - take, history.size()));
  if (it == contexts_.end() || it->second.total == 0) return lower;
  const auto& succ = it->second;
  const auto c = succ.counts.find(token);
  const double count = c == succ.counts.end() ? 0.0 : static_cast<double>(c->second);
  const double total = static_cast<double>(succ.total);
  const double distinct = static_cast<double>(succ.counts.size());
  return (std::max(count - discount_, 0.0) + discount_ * distinct * lower) / total;
}

double NgramModel::prob(const std::vector<std::string>& history, const std::string& token) const {
  const auto need = static_cast<std::size_t>(order_ - 1);
  std::vector<std::string> h;
  if (history.size() < need) h.assign(need - history.size(), std::string(kSentenceStart));
  const auto from = history.size() > need ? history.size() - need : 0;
  h.insert(h.end(), history.begin() + static_cast<std::ptrdiff_t>(from), history.end());
  if (vocab_.contains(token)) return prob_at(h, need, token);
  return prob_at(h, need, std::string(kUnknown));
}

double NgramModel::score_tokens(const std::vector<std::string>& tokens) const {
  std::vector<std::string> history;
  double total = 0;
  for (const auto& t : tokens) {
    total += std::log(prob(history, t));
    history.push_back(t);
  }
  total += std::log(prob(history, std::string(kSentenceEnd)));
  return total;
}

double NgramModel::score(std::string_view sentence) const {
  return score_tokens(tokenize(sentence));
}

std::string NgramModel::serialize() const {
  BinaryWriter w;
  w.magic(kMagic);
  w.u32(static_cast<std::uint32_t>(order_));
  w.f64(discount_);
  w.u32(static_cast<std::uint32_t>(vocab_.size()));
  for (const auto& v : vocab_) w.str(v);
  w.u32(static_cast<std::uint32_t>(contexts_.size()));
  for (const auto& [ctx, succ] : contexts_) {
    w.str(ctx);
    w.u32(static_cast<std::uint32_t>(succ.counts.size()));
    for (const auto& [tok, n] : succ.counts) {
      w.str(tok);
      w.u64(n);
    }
  }
  return w.bytes();
}

NgramModel NgramModel::deserialize(std::string_view bytes) {
  BinaryReader r(bytes);
  r.expect_magic(kMagic);
  NgramModel m;
  const auto order = r.u32();
  if (order < 1 || order > 5) throw Error(Errc::parse_error, "lm.bin: bad order");
  m.order_ = static_cast<int>(order);
  m.discount_ = r.f64();
  if (!(m.discount_ > 0 && m.discount_ < 1)) throw Error(Errc::parse_error, "lm.bin: bad discount");
  for (auto n = r.u32(); n > 0; --n) m.vocab_.insert(r.str());
  for (auto n = r.u32(); n > 0; --n) {
    auto& succ = m.contexts_[r.str()];
    for (auto k = r.u32(); k > 0; --k) {
      auto tok = r.str();
      const auto count = r.u64();
      if (count == 0 || !m.vocab_.contains(tok)) throw Error(Errc::parse_error, "lm.bin: bad count entry");
      succ.counts[std::move(tok)] = count;
      succ.total += count;
    }
  }
  if (!r.at_end()) throw Error(Errc::parse_error, "lm.bin: trailing bytes");
  return m;
}

NgramModel build_lm(const std::vector<TrainingExample>& examples, int order) {
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(examples.size());
  for (const auto& e : examples) sentences.push_back(e.tokens);
  return NgramModel::build(sentences, order);
}

}  // namespace corvid::datagen

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "corvid/nlu/model.hpp"

namespace corvid::nlu {

namespace {

using Slot = std::tuple<std::string, std::string, std::string>;

}  // namespace

bool slots_match(const IntentResult& result, const datagen::TrainingExample& expected) {
  std::vector<Slot> got, want;
  for (const auto& e : result.entities) got.emplace_back(e.entity, e.role.value_or(""), e.value);
  for (const auto& a : expected.annotations) want.emplace_back(a.entity, a.role.value_or(""), a.canonical);
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  return got == want;
}

EvalReport evaluate(const NluModel& model, const std::vector<datagen::TrainingExample>& labeled) {
  EvalReport report;
  std::size_t intent_ok = 0, full_ok = 0;
  for (const auto& e : labeled) {
    const auto r = model.parse(e.text());
    const std::string predicted = r ? r->intent_id : std::string(kNoMatch);
    ++report.confusion[{e.intent_id, predicted}];
    if (predicted != e.intent_id) continue;
    ++intent_ok;
    if (slots_match(*r, e)) ++full_ok;
  }
  report.total = labeled.size();
  if (report.total > 0) {
    report.intent_accuracy = static_cast<double>(intent_ok) / static_cast<double>(report.total);
    report.full_accuracy = static_cast<double>(full_ok) / static_cast<double>(report.total);
  }
  return report;
}

std::string EvalReport::format() const {
  std::ostringstream out;
  out << fmt::format("examples: {}\nintent_accuracy: {:.4f}\nfull_accuracy: {:.4f}\nconfusion:\n", total,
                     intent_accuracy, full_accuracy);
  for (const auto& [key, n] : confusion) out << fmt::format("  {} -> {}: {}\n", key.first, key.second, n);
  return out.str();
}

}  // namespace corvid::nlu

// SPDX-License-Identifier: Apache-2.0
#include "eq5d/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"

namespace eq5d {

namespace {

constexpr std::array kPopulations = {"Adults", "Children", "Older patients", "Outpatients", "Veterans",
                                     "Nursing home residents", "Women", "Smokers"};
constexpr std::array kConditions = {"diabetes", "asthma", "hypertension", "psoriasis", "migraine",
                                    "osteoarthritis", "depression", "obesity", "epilepsy", "anaemia"};
constexpr std::array kTreatments = {"metformin", "insulin", "physiotherapy", "aspirin", "statins",
                                    "counselling", "acupuncture", "ibuprofen", "surgery", "vaccination"};
constexpr std::array kOutcomes = {"blood pressure", "mortality", "hospital admissions", "pain scores",
                                  "body weight", "relapse rates", "adherence", "adverse events"};
constexpr std::array kSettings = {"a rural clinic", "three hospitals", "primary care", "a national registry",
                                  "community pharmacies", "an urban cohort"};
constexpr std::array kMarkerInstruments = {"EQ-5D", "EQ-5D-5L", "EQ-5D-3L"};

template <std::size_t N>
const char* pick(Rng& rng, const std::array<const char*, N>& xs) {
  return xs[rng.below(N)];
}

std::string filler(Rng& rng) {
  char buf[256];
  switch (rng.below(5)) {
    case 0:
      std::snprintf(buf, sizeof buf, "%s with %s received %s for %d weeks.", pick(rng, kPopulations),
                    pick(rng, kConditions), pick(rng, kTreatments), static_cast<int>(4 + rng.below(49)));
      break;
    case 1:
      std::snprintf(buf, sizeof buf, "The study enrolled %d participants from %s.", static_cast<int>(20 + rng.below(900)),
                    pick(rng, kSettings));
      break;
    case 2:
      std::snprintf(buf, sizeof buf, "Changes in %s were compared between %s and %s groups.", pick(rng, kOutcomes),
                    pick(rng, kTreatments), pick(rng, kTreatments));
      break;
    case 3:
      std::snprintf(buf, sizeof buf, "%s reduced %s in patients with %s.", pick(rng, kTreatments), pick(rng, kOutcomes),
                    pick(rng, kConditions));
      buf[0] = static_cast<char>(buf[0] - ('a' <= buf[0] && buf[0] <= 'z' ? 32 : 0));
      break;
    default:
      std::snprintf(buf, sizeof buf, "Follow-up lasted %d months and %s was the primary endpoint.",
                    static_cast<int>(3 + rng.below(34)), pick(rng, kOutcomes));
      break;
  }
  return buf;
}

std::string marker(Rng& rng) {
  char buf[256];
  switch (rng.below(3)) {
    case 0:
      std::snprintf(buf, sizeof buf, "Health-related quality of life was measured with the %s questionnaire.",
                    pick(rng, kMarkerInstruments));
      break;
    case 1:
      std::snprintf(buf, sizeof buf, "Utility values were derived from %s responses of patients with %s.",
                    pick(rng, kMarkerInstruments), pick(rng, kConditions));
      break;
    default:
      std::snprintf(buf, sizeof buf, "The %s index improved after %s.", pick(rng, kMarkerInstruments),
                    pick(rng, kTreatments));
      break;
  }
  return buf;
}

}  // namespace

bool is_marker_sentence(std::string_view sentence) { return sentence.find("EQ-5D") != std::string_view::npos; }

std::vector<StudyRecord> synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.min_sentences == 0 || spec.max_sentences < spec.min_sentences || spec.filler_pool == 0)
    throw ValidationError("synthetic corpus: bad sentence range or empty filler pool");
  Rng rng(spec.seed);
  const auto n_pos = static_cast<std::size_t>(std::llround(spec.positive_fraction * static_cast<double>(spec.n_studies)));
  std::vector<std::uint8_t> shuffled(spec.n_studies, 0);
  for (std::size_t i = 0; i < n_pos && i < shuffled.size(); ++i) shuffled[i] = 1;
  rng.shuffle(std::span<std::uint8_t>(shuffled));
  std::vector<std::string> pool;
  Rng pool_rng(derive_seed(spec.seed, fnv1a64("fillers")));
  for (std::size_t i = 0; i < spec.filler_pool; ++i) pool.push_back(filler(pool_rng));
  std::vector<StudyRecord> out;
  out.reserve(spec.n_studies);
  for (std::size_t i = 0; i < spec.n_studies; ++i) {
    StudyRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "S%04zu", i + 1);
    r.study_id = id;
    r.label = label_from_bool(shuffled[i] != 0);
    const std::size_t n = spec.min_sentences + rng.below(spec.max_sentences - spec.min_sentences + 1);
    const std::size_t marker_at = shuffled[i] != 0 ? rng.below(n) : n;
    std::string text;
    for (std::size_t s = 0; s < n; ++s) {
      if (!text.empty()) text += ' ';
      text += s == marker_at ? marker(rng) : pool[rng.below(pool.size())];
    }
    r.abstract = std::move(text);
    r.title = std::string("Study of ") + pick(rng, kConditions);
    r.keywords = {pick(rng, kConditions)};
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace eq5d

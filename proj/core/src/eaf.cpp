// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <map>
#include <string>

#include "sonnet/annotations.hpp"
#include "sonnet/errors.hpp"
#include "text_util.hpp"

namespace sonnet {

namespace pt = boost::property_tree;

namespace {

// Tier ids are either the bare kind ("food_lifted") or carry a participant
// prefix ("P2_food_lifted"); the longest matching kind suffix wins.
std::optional<EventKind> KindFromTier(const std::string& tier) {
  std::optional<EventKind> best;
  std::size_t best_len = 0;
  for (int i = 0; i < kNumEventKinds; ++i) {
    auto kind = static_cast<EventKind>(i);
    auto name = ToString(kind);
    if (tier.size() >= name.size() &&
        tier.compare(tier.size() - name.size(), name.size(), name) == 0 &&
        name.size() > best_len) {
      best = kind;
      best_len = name.size();
    }
  }
  return best;
}

}  // namespace

void ImportEaf(const std::filesystem::path& eaf, int seat, SessionAnnotations& session) {
  pt::ptree tree;
  try {
    pt::read_xml(eaf.string(), tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::kFormatError, eaf.string() + ": " + e.what());
  }
  const auto& doc = tree.get_child("ANNOTATION_DOCUMENT", pt::ptree());
  std::map<std::string, std::int64_t> slots;
  for (const auto& [tag, node] : doc.get_child("TIME_ORDER", pt::ptree())) {
    if (tag != "TIME_SLOT") continue;
    auto id = node.get<std::string>("<xmlattr>.TIME_SLOT_ID", "");
    auto value = node.get_optional<std::int64_t>("<xmlattr>.TIME_VALUE");
    if (!id.empty() && value) slots[id] = *value;
  }
  auto& events = session.seat_events(seat);
  for (const auto& [tag, tier] : doc) {
    if (tag != "TIER") continue;
    auto tier_id = tier.get<std::string>("<xmlattr>.TIER_ID", "");
    auto kind = KindFromTier(tier_id);
    if (!kind) continue;
    for (const auto& [atag, ann] : tier) {
      if (atag != "ANNOTATION") continue;
      const auto& aa = ann.get_child("ALIGNABLE_ANNOTATION", pt::ptree());
      auto r1 = slots.find(aa.get<std::string>("<xmlattr>.TIME_SLOT_REF1", ""));
      auto r2 = slots.find(aa.get<std::string>("<xmlattr>.TIME_SLOT_REF2", ""));
      if (r1 == slots.end() || r2 == slots.end())
        throw Error(ErrorCode::kFormatError, eaf.string() + ": unresolved time slot in tier " + tier_id);
      auto raw = std::string(text::Trim(aa.get<std::string>("ANNOTATION_VALUE", "")));
      auto value = ParseEventValue(raw);
      if (!value)
        throw Error(ErrorCode::kIllegalValueForKind,
                    eaf.string() + ": unknown value '" + raw + "' in tier " + tier_id);
      if (!IsLegalValue(*kind, *value))
        throw Error(ErrorCode::kIllegalValueForKind,
                    eaf.string() + ": " + raw + " is not legal for " + std::string(ToString(*kind)));
      if (r2->second <= r1->second)
        throw Error(ErrorCode::kNonPositiveDuration, eaf.string() + ": empty annotation in " + tier_id);
      events.push_back(AnnotationEvent{*kind, *value, r1->second, r2->second});
      session.duration_ms = std::max(session.duration_ms, r2->second);
    }
  }
  Canonicalize(session);
}

}  // namespace sonnet

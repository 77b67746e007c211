// src/labels.cpp

// Copyright 2026  The Sluformer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "slu/labels.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "slu/common.hpp"

namespace slu {

using nlohmann::json;

namespace {
void CheckUnique(const std::vector<std::string>& names, const std::string& what) {
  std::set<std::string> seen(names.begin(), names.end());
  if (seen.size() != names.size()) {
    throw DataError(Msg("label space: duplicate name in ", what));
  }
  if (names.empty()) {
    throw DataError(Msg("label space: ", what, " must have at least one value"));
  }
}

int FindName(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}
}  // namespace

LabelSpace::LabelSpace(std::vector<std::string> domains, std::vector<std::string> intents,
                       std::vector<std::vector<std::string>> slot_fields)
    : domains_(std::move(domains)),
      intents_(std::move(intents)),
      slot_fields_(std::move(slot_fields)) {
  CheckUnique(domains_, "domains");
  CheckUnique(intents_, "intents");
  for (size_t i = 0; i < slot_fields_.size(); ++i) {
    CheckUnique(slot_fields_[i], Msg("slot field ", i));
  }
}

LabelSpace LabelSpace::FromJsonFile(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(Msg("label space: cannot open ", path));
  std::stringstream ss;
  ss << is.rdbuf();
  return FromJsonText(ss.str());
}

LabelSpace LabelSpace::FromJsonText(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(Msg("label space: bad json: ", e.what()));
  }
  if (!j.contains("domains") || !j.contains("intents") || !j.contains("slots")) {
    throw DataError("label space: json must contain domains, intents, slots");
  }
  return LabelSpace(j["domains"].get<std::vector<std::string>>(),
                    j["intents"].get<std::vector<std::string>>(),
                    j["slots"].get<std::vector<std::vector<std::string>>>());
}

std::string LabelSpace::ToJsonText() const {
  json j;
  j["domains"] = domains_;
  j["intents"] = intents_;
  j["slots"] = slot_fields_;
  return j.dump(2);
}

int LabelSpace::SlotCardinality(int field) const {
  if (field < 0 || field >= NumSlotFields()) {
    throw UsageError(Msg("label space: slot field ", field, " out of range"));
  }
  return static_cast<int>(slot_fields_[static_cast<size_t>(field)].size());
}

const std::vector<std::string>& LabelSpace::SlotValues(int field) const {
  SlotCardinality(field);  // range check
  return slot_fields_[static_cast<size_t>(field)];
}

int LabelSpace::DomainId(const std::string& name) const { return FindName(domains_, name); }
int LabelSpace::IntentId(const std::string& name) const { return FindName(intents_, name); }
int LabelSpace::SlotId(int field, const std::string& name) const {
  return FindName(SlotValues(field), name);
}

int64_t LabelSpace::ClassCount() const {
  int64_t count = static_cast<int64_t>(NumDomains()) * NumIntents();
  for (int f = 0; f < NumSlotFields(); ++f) count *= SlotCardinality(f);
  return count;
}

bool LabelSpace::ValidLabel(const LabelVector& lv) const {
  if (lv.domain < 0 || lv.domain >= NumDomains()) return false;
  if (lv.intent < 0 || lv.intent >= NumIntents()) return false;
  if (static_cast<int>(lv.slots.size()) != NumSlotFields()) return false;
  for (int f = 0; f < NumSlotFields(); ++f) {
    if (lv.slots[static_cast<size_t>(f)] < 0 ||
        lv.slots[static_cast<size_t>(f)] >= SlotCardinality(f)) {
      return false;
    }
  }
  return true;
}

int64_t LabelSpace::LabelToClass(const LabelVector& lv) const {
  if (!ValidLabel(lv)) throw UsageError("label_to_class: label outside this space");
  int64_t id = lv.domain;
  id = id * NumIntents() + lv.intent;
  for (int f = 0; f < NumSlotFields(); ++f) {
    id = id * SlotCardinality(f) + lv.slots[static_cast<size_t>(f)];
  }
  return id;
}

LabelVector LabelSpace::ClassToLabel(int64_t class_id) const {
  if (class_id < 0 || class_id >= ClassCount()) {
    throw UsageError(Msg("class_to_label: class ", class_id, " out of range [0, ",
                         ClassCount(), ")"));
  }
  LabelVector lv;
  lv.slots.assign(static_cast<size_t>(NumSlotFields()), 0);
  for (int f = NumSlotFields() - 1; f >= 0; --f) {
    lv.slots[static_cast<size_t>(f)] = static_cast<int>(class_id % SlotCardinality(f));
    class_id /= SlotCardinality(f);
  }
  lv.intent = static_cast<int>(class_id % NumIntents());
  class_id /= NumIntents();
  lv.domain = static_cast<int>(class_id);
  return lv;
}

int LabelSpace::VocabSize() const {
  int v = 2 + NumDomains() + NumIntents();
  for (int f = 0; f < NumSlotFields(); ++f) v += SlotCardinality(f);
  return v;
}

int LabelSpace::DomainToken(int id) const {
  if (id < 0 || id >= NumDomains()) throw UsageError(Msg("domain id ", id, " out of range"));
  return 2 + id;
}

int LabelSpace::IntentToken(int id) const {
  if (id < 0 || id >= NumIntents()) throw UsageError(Msg("intent id ", id, " out of range"));
  return 2 + NumDomains() + id;
}

int LabelSpace::SlotToken(int field, int id) const {
  if (id < 0 || id >= SlotCardinality(field)) {
    throw UsageError(Msg("slot ", field, " id ", id, " out of range"));
  }
  int base = 2 + NumDomains() + NumIntents();
  for (int f = 0; f < field; ++f) base += SlotCardinality(f);
  return base + id;
}

LabelSpace::TokenInfo LabelSpace::TokenOf(int token) const {
  if (token < 0 || token >= VocabSize()) {
    throw UsageError(Msg("token ", token, " out of range [0, ", VocabSize(), ")"));
  }
  if (token < 2) return {LabelField::kMarker, -1, token};
  token -= 2;
  if (token < NumDomains()) return {LabelField::kDomain, -1, token};
  token -= NumDomains();
  if (token < NumIntents()) return {LabelField::kIntent, -1, token};
  token -= NumIntents();
  for (int f = 0; f < NumSlotFields(); ++f) {
    if (token < SlotCardinality(f)) return {LabelField::kSlot, f, token};
    token -= SlotCardinality(f);
  }
  throw Error("token classification out of sync with vocab size");
}

std::string LabelSpace::TokenName(int token) const {
  TokenInfo info = TokenOf(token);
  switch (info.field) {
    case LabelField::kMarker:
      return info.value == kSop ? "<sop>" : "<eop>";
    case LabelField::kDomain:
      return domains_[static_cast<size_t>(info.value)];
    case LabelField::kIntent:
      return intents_[static_cast<size_t>(info.value)];
    case LabelField::kSlot:
      return slot_fields_[static_cast<size_t>(info.index)][static_cast<size_t>(info.value)];
  }
  throw Error("unreachable");
}

std::pair<int, int> LabelSpace::FieldTokenRange(int pos) const {
  if (pos == 0) return {DomainToken(0), DomainToken(0) + NumDomains()};
  if (pos == 1) return {IntentToken(0), IntentToken(0) + NumIntents()};
  int field = pos - 2;
  if (field < 0 || field >= NumSlotFields()) {
    throw UsageError(Msg("field position ", pos, " out of range"));
  }
  return {SlotToken(field, 0), SlotToken(field, 0) + SlotCardinality(field)};
}

LabelSpace DefaultLabelSpace() {
  return LabelSpace(
      {"media", "lights", "climate", "timer", "shopping"},
      {"activate", "deactivate", "increase", "decrease"},
      {{"kitchen", "bedroom", "garage"}, {"low", "high"}});
}

}  // namespace slu

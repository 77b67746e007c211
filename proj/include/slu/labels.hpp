// slu/labels.hpp

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

// The label data model: one domain, one intent, M slot values per
// utterance. Two projections of the same space coexist:
//  - classification: every (domain, intent, slots) tuple is a single class
//    id under a mixed-radix bijection, domain most significant;
//  - sequence: a flat token vocabulary with disjoint id ranges per field,
//    framed by start/end markers.

#ifndef SLU_LABELS_HPP_
#define SLU_LABELS_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace slu {

/// Field ids within a decoded sequence.
enum class LabelField { kDomain, kIntent, kSlot, kMarker };

struct LabelVector {
  int domain = -1;
  int intent = -1;
  std::vector<int> slots;

  bool operator==(const LabelVector&) const = default;
};

class LabelSpace {
 public:
  LabelSpace() = default;
  LabelSpace(std::vector<std::string> domains, std::vector<std::string> intents,
             std::vector<std::vector<std::string>> slot_fields);

  static LabelSpace FromJsonFile(const std::string& path);
  static LabelSpace FromJsonText(const std::string& text);
  std::string ToJsonText() const;

  int NumDomains() const { return static_cast<int>(domains_.size()); }
  int NumIntents() const { return static_cast<int>(intents_.size()); }
  int NumSlotFields() const { return static_cast<int>(slot_fields_.size()); }
  int SlotCardinality(int field) const;

  const std::vector<std::string>& Domains() const { return domains_; }
  const std::vector<std::string>& Intents() const { return intents_; }
  const std::vector<std::string>& SlotValues(int field) const;

  int DomainId(const std::string& name) const;  // -1 if unknown
  int IntentId(const std::string& name) const;
  int SlotId(int field, const std::string& name) const;

  /// Number of distinct (domain, intent, slots) combinations.
  int64_t ClassCount() const;

  int64_t LabelToClass(const LabelVector& lv) const;
  LabelVector ClassToLabel(int64_t class_id) const;

  // ---- token vocabulary (sequence form) ----
  static constexpr int kSop = 0;
  static constexpr int kEop = 1;

  int VocabSize() const;
  int DomainToken(int id) const;
  int IntentToken(int id) const;
  int SlotToken(int field, int id) const;

  /// Field a token belongs to; for kSlot, `index` is the slot field and
  /// `value` the value id. Markers map to kMarker.
  struct TokenInfo {
    LabelField field;
    int index = -1;  // slot field index
    int value = -1;  // id within the field
  };
  TokenInfo TokenOf(int token) const;
  std::string TokenName(int token) const;

  /// Token ids a structurally valid sequence may use at content position
  /// `pos` (0 = domain, 1 = intent, 2.. = slots).
  std::pair<int, int> FieldTokenRange(int pos) const;  // [first, last)

  /// Tokens between sop and eop in a complete sequence: M + 2.
  int ContentLength() const { return 2 + NumSlotFields(); }

  bool ValidLabel(const LabelVector& lv) const;

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> domains_;
  std::vector<std::string> intents_;
  std::vector<std::vector<std::string>> slot_fields_;
};

/// The desk-scale default space: 5 domains, 4 intents, slots of 3 and 2
/// (120 classes).
LabelSpace DefaultLabelSpace();

}  // namespace slu

#endif  // SLU_LABELS_HPP_

/* Copyright 2026 The VocabLab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace vocablab {

// Prediction head family; decides label encoding and special classes.
enum class PredKind { CTC, ATTN, SEG };

// Punctuation marks that the corpus may insert and the renderer can draw.
inline constexpr std::string_view kPunctuation = ".,'-!?";

// Case-folded character classes shared by every prediction head: 26 letters,
// 10 digits, 6 punctuation marks. Each head appends exactly one special class
// (CTC blank, attention EOS, segmentation background) at index 42.
class ClassSet {
 public:
  static constexpr int kNumChars = 42;
  static constexpr int kSpecial = kNumChars;
  static constexpr int kNumClasses = kNumChars + 1;

  static const ClassSet& standard();

  int blank_index() const { return kSpecial; }
  int eos_index() const { return kSpecial; }
  int background_index() const { return kSpecial; }
  int num_chars() const { return kNumChars; }

  // Case-folds `c` first. Returns nullopt for characters outside the set.
  std::optional<int> index_of(char c) const;
  char char_of(int index) const;
  std::string_view chars() const { return chars_; }
  std::string signature() const { return std::string(chars_); }

 private:
  ClassSet();
  std::string_view chars_;
  std::array<int, 256> lookup_{};
};

}  // namespace vocablab

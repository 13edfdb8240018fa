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

#include "vocablab/classes.hpp"

#include <cctype>

#include "vocablab/error.hpp"

namespace vocablab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::EmptyAfterNormalize: return "empty_after_normalize";
    case ErrorCode::UnsupportedGlyph: return "unsupported_glyph";
    case ErrorCode::WordTooLong: return "word_too_long";
    case ErrorCode::DegenerateBox: return "degenerate_box";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::NonScalarLoss: return "non_scalar_loss";
    case ErrorCode::LabelTooLong: return "label_too_long";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::MissingCell: return "missing_cell";
    case ErrorCode::ClassSetMismatch: return "class_set_mismatch";
    case ErrorCode::Io: return "io";
    case ErrorCode::Format: return "format";
  }
  return "unknown";
}

ClassSet::ClassSet() : chars_("abcdefghijklmnopqrstuvwxyz0123456789.,'-!?") {
  lookup_.fill(-1);
  for (int i = 0; i < static_cast<int>(chars_.size()); ++i) {
    lookup_[static_cast<unsigned char>(chars_[i])] = i;
  }
}

const ClassSet& ClassSet::standard() {
  static const ClassSet instance;
  return instance;
}

std::optional<int> ClassSet::index_of(char c) const {
  const auto folded = static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(c)));
  const int idx = lookup_[folded];
  if (idx < 0) return std::nullopt;
  return idx;
}

char ClassSet::char_of(int index) const {
  if (index < 0 || index >= kNumChars) {
    throw Error(ErrorCode::InvalidInput, "class index " + std::to_string(index) + " is not a character class");
  }
  return chars_[static_cast<std::size_t>(index)];
}

}  // namespace vocablab

#pragma once

#include "eusim/common.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace eusim {

/// The four circumplex regions. Underlying values index probability vectors.
enum class Quadrant : int { R1 = 0, R2 = 1, R3 = 2, R4 = 3 };

inline const char* quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::R1: return "R1";
    case Quadrant::R2: return "R2";
    case Quadrant::R3: return "R3";
    case Quadrant::R4: return "R4";
  }
  return "?";
}

std::optional<Quadrant> quadrant_from_name(const std::string& name);

/// Quadrant from the signs of (valence, arousal); both must be nonzero.
Quadrant quadrant_of_signs(double valence, double arousal);

/// One of the sixteen 22.5-degree circumplex sectors, 1-based.
/// Sector 1 starts at angle 0 inclusive.
using FineState = int;

/// Sector of atan2(arousal, valence). Sector boundaries belong to the
/// counter-clockwise sector (inclusive start), including the axes.
/// (0,0) carries no direction and is rejected.
FineState to_fine_state(double valence, double arousal);

Quadrant to_quadrant(FineState state);

struct LexiconEntry {
  double valence = 0.0;
  double arousal = 0.0;
};

struct LexiconReject {
  std::size_t line_number;
  std::string reason;
};

struct Lexicon {
  std::unordered_map<std::string, LexiconEntry> words;

  bool contains(const std::string& w) const { return words.count(w) != 0; }
  std::size_t size() const { return words.size(); }
};

struct LexiconLoad {
  Lexicon lexicon;
  std::vector<LexiconReject> rejects;
};

/// Loads either format:
///   word<TAB>valence<TAB>arousal          (values in [-1,1], (0,0) forbidden)
///   word<TAB>category<TAB>0|1             (NRC-emotion style)
/// Duplicate words are averaged. Category rows map onto the circumplex via a
/// fixed category->angle table (unit radius, see affect.cpp). Malformed or
/// out-of-range rows land in the rejects list with their line number.
LexiconLoad load_lexicon(const std::string& path);
LexiconLoad parse_lexicon(std::istream& in);

/// Lowercases, drops URL and @mention tokens, strips a leading '#', splits
/// on non-alphanumerics. Contractions ending in "n't" additionally emit the
/// negator token "n't" after the stem.
std::vector<std::string> tokenize(const std::string& text);

struct ValenceArousal {
  double valence;
  double arousal;
};

/// Mean (valence, arousal) over lexicon-matched tokens. A token immediately
/// preceded by a negator {not, no, never, n't} contributes (-v, a).
/// Empty when no token matches or the mean is exactly (0,0).
std::optional<ValenceArousal> score_text(const std::string& text,
                                         const Lexicon& lexicon);

struct AffectLabel {
  double valence;
  double arousal;
  FineState fine;
  Quadrant quadrant;
};

/// score_text + fine-state + quadrant in one step; empty for emotionless text.
std::optional<AffectLabel> label_text(const std::string& text,
                                      const Lexicon& lexicon);

}  // namespace eusim

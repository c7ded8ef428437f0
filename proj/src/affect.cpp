#include "eusim/affect.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace eusim {

std::optional<Quadrant> quadrant_from_name(const std::string& name) {
  if (name == "R1") return Quadrant::R1;
  if (name == "R2") return Quadrant::R2;
  if (name == "R3") return Quadrant::R3;
  if (name == "R4") return Quadrant::R4;
  return std::nullopt;
}

Quadrant quadrant_of_signs(double valence, double arousal) {
  require(valence != 0.0 && arousal != 0.0,
          "quadrant_of_signs: point lies on an axis");
  if (valence > 0.0) return arousal > 0.0 ? Quadrant::R1 : Quadrant::R2;
  return arousal > 0.0 ? Quadrant::R4 : Quadrant::R3;
}

FineState to_fine_state(double valence, double arousal) {
  require(std::isfinite(valence) && std::isfinite(arousal),
          "to_fine_state: non-finite input");
  require(valence != 0.0 || arousal != 0.0,
          "to_fine_state: (0,0) has no direction");

  // Axis-exact points sit on a sector start and belong to the
  // counter-clockwise sector.
  if (arousal == 0.0) return valence > 0.0 ? 1 : 9;
  if (valence == 0.0) return arousal > 0.0 ? 5 : 13;

  // Within each sign-quadrant the three half-sector splits sit at 22.5, 45
  // and 67.5 degrees from the valence axis. Comparing |a| against |v|*tan
  // keeps the diagonal split exact, which floor(atan2(...)/22.5) does not.
  const double t = 0.41421356237309503;  // tan(22.5 deg) = sqrt(2) - 1
  const double av = std::abs(valence);
  const double aa = std::abs(arousal);

  if (valence > 0.0 && arousal > 0.0) {
    int b = (aa >= av * t) + (aa >= av) + (aa * t >= av);
    return 1 + b;
  }
  if (valence < 0.0 && arousal > 0.0) {
    int b = (aa > av * t) + (aa > av) + (aa * t > av);
    return 8 - b;
  }
  if (valence < 0.0 && arousal < 0.0) {
    int b = (aa >= av * t) + (aa >= av) + (aa * t >= av);
    return 9 + b;
  }
  int b = (aa > av * t) + (aa > av) + (aa * t > av);
  return 16 - b;
}

Quadrant to_quadrant(FineState state) {
  require(state >= 1 && state <= 16, "to_quadrant: sector out of range");
  if (state <= 4) return Quadrant::R1;
  if (state <= 8) return Quadrant::R4;
  if (state <= 12) return Quadrant::R3;
  return Quadrant::R2;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

// Category angles in degrees. Stored vectors get a hair of counter-clockwise
// rotation so entries sitting exactly on a sector boundary bucket into the
// sector the boundary starts (matching to_fine_state's inclusive starts)
// regardless of floating-point rounding.
ValenceArousal category_point(double degrees) {
  double rad = (degrees + 1e-9) * kPi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

const std::map<std::string, ValenceArousal>& category_table() {
  static const std::map<std::string, ValenceArousal> table = {
      {"joy", category_point(45.0)},
      {"trust", category_point(67.5)},
      {"surprise", category_point(90.0)},
      {"anticipation", category_point(112.5)},
      {"anger", category_point(135.0)},
      {"fear", category_point(157.5)},
      {"disgust", category_point(202.5)},
      {"sadness", category_point(225.0)},
  };
  return table;
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return cols;
}

struct Accum {
  double v_sum = 0.0;
  double a_sum = 0.0;
  std::size_t count = 0;
  std::size_t last_line = 0;
};

bool is_negator(const std::string& tok) {
  return tok == "not" || tok == "no" || tok == "never" || tok == "n't";
}

}  // namespace

LexiconLoad parse_lexicon(std::istream& in) {
  LexiconLoad out;
  std::map<std::string, Accum> accum;

  // Format is detected from the first usable row: a numeric second column
  // means (valence, arousal) rows, anything else means category rows.
  int format = 0;  // 0 undecided, 1 numeric, 2 category

  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    auto cols = split_tabs(line);
    if (cols.size() != 3) {
      out.rejects.push_back({line_number, "expected 3 tab-separated columns"});
      continue;
    }
    const std::string& word = cols[0];
    if (word.empty()) {
      out.rejects.push_back({line_number, "empty word"});
      continue;
    }

    if (format == 0) {
      double probe;
      format = parse_double(cols[1], probe) ? 1 : 2;
    }

    double v, a;
    if (format == 1) {
      if (!parse_double(cols[1], v) || !parse_double(cols[2], a)) {
        out.rejects.push_back({line_number, "non-numeric value"});
        continue;
      }
      if (std::abs(v) > 1.0 || std::abs(a) > 1.0) {
        out.rejects.push_back({line_number, "value outside [-1,1]"});
        continue;
      }
      if (v == 0.0 && a == 0.0) {
        out.rejects.push_back({line_number, "(0,0) carries no signal"});
        continue;
      }
    } else {
      const std::string& category = cols[1];
      if (cols[2] != "0" && cols[2] != "1") {
        out.rejects.push_back({line_number, "flag must be 0 or 1"});
        continue;
      }
      if (cols[2] == "0") continue;
      if (category == "positive" || category == "negative") continue;
      auto it = category_table().find(category);
      if (it == category_table().end()) {
        out.rejects.push_back({line_number, "unknown category '" + category + "'"});
        continue;
      }
      v = it->second.valence;
      a = it->second.arousal;
    }

    Accum& acc = accum[word];
    acc.v_sum += v;
    acc.a_sum += a;
    acc.count += 1;
    acc.last_line = line_number;
  }

  for (const auto& [word, acc] : accum) {
    double v = acc.v_sum / static_cast<double>(acc.count);
    double a = acc.a_sum / static_cast<double>(acc.count);
    if (v == 0.0 && a == 0.0) {
      out.rejects.push_back({acc.last_line, "duplicates average to (0,0)"});
      continue;
    }
    out.lexicon.words[word] = {v, a};
  }
  return out;
}

LexiconLoad load_lexicon(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_lexicon: cannot open " + path);
  return parse_lexicon(in);
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;

  std::istringstream ss(text);
  std::string raw;
  while (ss >> raw) {
    std::string lower;
    lower.reserve(raw.size());
    for (char c : raw)
      lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

    if (lower.rfind("http://", 0) == 0 || lower.rfind("https://", 0) == 0 ||
        lower.rfind("www.", 0) == 0)
      continue;
    if (!lower.empty() && lower[0] == '@') continue;
    if (!lower.empty() && lower[0] == '#') lower.erase(0, 1);

    bool negated_suffix = false;
    if (lower.size() > 3 && lower.compare(lower.size() - 3, 3, "n't") == 0) {
      lower.erase(lower.size() - 3);
      negated_suffix = true;
    }

    std::string piece;
    for (char c : lower) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        piece.push_back(c);
      } else if (!piece.empty()) {
        tokens.push_back(piece);
        piece.clear();
      }
    }
    if (!piece.empty()) tokens.push_back(piece);
    if (negated_suffix) tokens.push_back("n't");
  }
  return tokens;
}

std::optional<ValenceArousal> score_text(const std::string& text,
                                         const Lexicon& lexicon) {
  auto tokens = tokenize(text);
  double v_sum = 0.0, a_sum = 0.0;
  std::size_t matched = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = lexicon.words.find(tokens[i]);
    if (it == lexicon.words.end()) continue;
    double v = it->second.valence;
    if (i > 0 && is_negator(tokens[i - 1])) v = -v;
    v_sum += v;
    a_sum += it->second.arousal;
    ++matched;
  }
  if (matched == 0) return std::nullopt;
  double v = v_sum / static_cast<double>(matched);
  double a = a_sum / static_cast<double>(matched);
  if (v == 0.0 && a == 0.0) return std::nullopt;
  return ValenceArousal{v, a};
}

std::optional<AffectLabel> label_text(const std::string& text,
                                      const Lexicon& lexicon) {
  auto score = score_text(text, lexicon);
  if (!score) return std::nullopt;
  FineState fine = to_fine_state(score->valence, score->arousal);
  return AffectLabel{score->valence, score->arousal, fine, to_quadrant(fine)};
}

}  // namespace eusim

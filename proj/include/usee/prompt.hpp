#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "usee/conditioning.hpp"
#include "usee/rng.hpp"

namespace usee {

enum class EditAction { AddBackground, AddReverb, RemoveNoise, RemoveReverb };
enum class RoomSize { Small, Medium, Large };

inline std::string to_string(RoomSize r) {
  switch (r) {
    case RoomSize::Small: return "small";
    case RoomSize::Medium: return "medium";
    default: return "large";
  }
}

struct EditCommand {
  EditAction action = EditAction::RemoveNoise;
  std::vector<std::string> sound_label;  // AddBackground only, 1-4 tokens
  std::optional<double> snr_db;          // AddBackground only, [0, 15]
  std::optional<RoomSize> room_size;     // AddReverb only

  bool operator==(const EditCommand&) const = default;
};

struct PromptParseError : std::runtime_error {
  std::size_t token_pos;  // index of the first unexpected token
  PromptParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg), token_pos(pos) {}
};

struct PromptRangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct TokenCursor {
  const std::vector<std::string>& toks;
  std::size_t pos = 0;

  bool done() const { return pos >= toks.size(); }
  const std::string& peek() const {
    static const std::string kEnd = "<end>";
    return done() ? kEnd : toks[pos];
  }
  void expect(const std::string& want) {
    if (done() || toks[pos] != want)
      throw PromptParseError("expected \"" + want + "\" but found \"" + peek() + "\"", pos);
    ++pos;
  }
  bool accept(const std::string& want) {
    if (!done() && toks[pos] == want) {
      ++pos;
      return true;
    }
    return false;
  }
};

inline bool is_number_token(const std::string& t) {
  if (t.empty()) return false;
  bool digit = false, dot = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    char c = t[i];
    if (c >= '0' && c <= '9') {
      digit = true;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      return false;
    }
  }
  return digit;
}

}  // namespace detail

// Grammar:
//   command  := add_bg | add_rvb | rm_noise | rm_rvb
//   add_bg   := "add background sound as" label "with snr as" number "db"
//   add_rvb  := "add reverberation with" ("small"|"medium"|"large") "room" ["size"]
//   rm_noise := "remove noise"
//   rm_rvb   := "remove reverberation"
//   label    := 1-4 word tokens
inline EditCommand parse_prompt(const std::string& prompt) {
  auto toks = tokenize_prompt(prompt);
  detail::TokenCursor c{toks};
  EditCommand cmd;
  if (c.accept("remove")) {
    if (c.accept("noise")) {
      cmd.action = EditAction::RemoveNoise;
    } else if (c.accept("reverberation") || c.accept("reverb")) {
      cmd.action = EditAction::RemoveReverb;
    } else {
      throw PromptParseError("expected \"noise\" or \"reverberation\" after \"remove\"", c.pos);
    }
  } else if (c.accept("add")) {
    if (c.accept("background")) {
      cmd.action = EditAction::AddBackground;
      c.expect("sound");
      c.expect("as");
      while (!c.done() && c.peek() != "with") {
        if (cmd.sound_label.size() == 4)
          throw PromptParseError("sound label longer than 4 tokens", c.pos);
        cmd.sound_label.push_back(c.peek());
        ++c.pos;
      }
      if (cmd.sound_label.empty()) throw PromptParseError("missing sound label", c.pos);
      c.expect("with");
      c.expect("snr");
      c.expect("as");
      if (c.done() || !detail::is_number_token(c.peek()))
        throw PromptParseError("expected an SNR number, found \"" + c.peek() + "\"", c.pos);
      double v = std::strtod(c.peek().c_str(), nullptr);
      ++c.pos;
      c.expect("db");
      if (v < 0.0 || v > 15.0)
        throw PromptRangeError("SNR " + std::to_string(v) + " dB outside [0, 15]");
      cmd.snr_db = v;
    } else if (c.accept("reverberation") || c.accept("reverb")) {
      cmd.action = EditAction::AddReverb;
      c.expect("with");
      if (c.accept("small"))
        cmd.room_size = RoomSize::Small;
      else if (c.accept("medium"))
        cmd.room_size = RoomSize::Medium;
      else if (c.accept("large"))
        cmd.room_size = RoomSize::Large;
      else
        throw PromptParseError("expected a room size (small/medium/large), found \"" + c.peek() +
                                   "\"",
                               c.pos);
      c.expect("room");
      c.accept("size");  // optional
    } else {
      throw PromptParseError("expected \"background\" or \"reverberation\" after \"add\"", c.pos);
    }
  } else {
    throw PromptParseError("unrecognized command start \"" + c.peek() + "\"", c.pos);
  }
  if (!c.done()) throw PromptParseError("unexpected trailing token \"" + c.peek() + "\"", c.pos);
  return cmd;
}

inline void validate_command(const EditCommand& cmd) {
  switch (cmd.action) {
    case EditAction::AddBackground:
      if (cmd.sound_label.empty() || cmd.sound_label.size() > 4 || !cmd.snr_db ||
          cmd.room_size)
        throw std::invalid_argument("AddBackground needs sound_label and snr_db only");
      if (*cmd.snr_db < 0.0 || *cmd.snr_db > 15.0)
        throw std::invalid_argument("snr_db outside [0, 15]");
      break;
    case EditAction::AddReverb:
      if (!cmd.room_size || cmd.snr_db || !cmd.sound_label.empty())
        throw std::invalid_argument("AddReverb needs room_size only");
      break;
    default:
      if (cmd.snr_db || cmd.room_size || !cmd.sound_label.empty())
        throw std::invalid_argument("Remove* commands carry no optional fields");
  }
}

inline std::string format_snr(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  std::string s(buf);
  if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.resize(s.size() - 2);
  return s;
}

// canonical surface form; parse_prompt(format_command(cmd)) == cmd
inline std::string format_command(const EditCommand& cmd) {
  validate_command(cmd);
  switch (cmd.action) {
    case EditAction::RemoveNoise:
      return "Remove noise";
    case EditAction::RemoveReverb:
      return "Remove reverberation";
    case EditAction::AddReverb:
      return "Add reverberation with " + to_string(*cmd.room_size) + " room size";
    default: {
      std::string label;
      for (std::size_t i = 0; i < cmd.sound_label.size(); ++i) {
        if (i) label += ' ';
        label += cmd.sound_label[i];
      }
      return "Add background sound as " + label + " with SNR as " + format_snr(*cmd.snr_db) +
             "dB";
    }
  }
}

// uniform action, SNR uniform on [0, 15] quantized to 0.1 dB, uniform room size
inline EditCommand sample_command(Rng& rng, const std::vector<std::vector<std::string>>& labels) {
  if (labels.empty()) throw std::invalid_argument("sample_command: empty label vocabulary");
  EditCommand cmd;
  switch (rng.uniform_index(4)) {
    case 0: {
      cmd.action = EditAction::AddBackground;
      cmd.sound_label = labels[rng.uniform_index(labels.size())];
      cmd.snr_db = std::round(rng.uniform(0.0, 15.0) * 10.0) / 10.0;
      break;
    }
    case 1: {
      cmd.action = EditAction::AddReverb;
      cmd.room_size = static_cast<RoomSize>(rng.uniform_index(3));
      break;
    }
    case 2:
      cmd.action = EditAction::RemoveNoise;
      break;
    default:
      cmd.action = EditAction::RemoveReverb;
      break;
  }
  return cmd;
}

}  // namespace usee

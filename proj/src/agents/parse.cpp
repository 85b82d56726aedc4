#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>

#include <fmt/format.h>

#include "twinloop/agents.hpp"
#include "twinloop/error.hpp"

namespace twinloop {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// "- ", "* ", "1. ", "2) ", "• " and surrounding quotes or backticks.
std::string strip_decoration(std::string line) {
  static const std::regex bullet(R"(^(?:[-*+]|•|\d+[.)])\s+)");
  line = std::regex_replace(line, bullet, "", std::regex_constants::format_first_only);
  line = trim(line);
  auto quote = [](char c) { return c == '"' || c == '\'' || c == '`'; };
  while (line.size() >= 2 && quote(line.front()) && line.back() == line.front()) {
    line = trim(std::string_view(line).substr(1, line.size() - 2));
  }
  while (!line.empty() && (line.back() == '.' || line.back() == ',' || line.back() == ';')) {
    line.pop_back();
  }
  return trim(line);
}

std::optional<Action> parse_line(const std::string& line) {
  static const std::regex grammar(
      R"(^([A-Za-z][A-Za-z0-9_]*)\s*-\s*(open|close|set_power\s+([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?))$)",
      std::regex::icase);
  std::smatch m;
  if (!std::regex_match(line, m, grammar)) return std::nullopt;
  const std::string command = lower(m[2].str());
  if (command == "open") return Action::open(m[1].str());
  if (command == "close") return Action::close(m[1].str());
  const std::string number = m[3].str();
  const char* first = number.data();
  if (*first == '+') ++first;
  double power = 0.0;
  auto [ptr, ec] = std::from_chars(first, number.data() + number.size(), power);
  if (ec != std::errc() || ptr != number.data() + number.size()) return std::nullopt;
  return Action::set_power(m[1].str(), power);
}

}  // namespace

ActionList parse_actions(std::string_view raw, std::string* rationale) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    lines.push_back(trim(raw.substr(start, end - start)));
    start = end + 1;
  }

  std::size_t first_action = 0;
  std::string inline_first;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string l = lower(strip_decoration(lines[i]));
    if (l.rfind("actions:", 0) == 0) {
      first_action = i + 1;
      inline_first = trim(std::string_view(strip_decoration(lines[i])).substr(8));
      if (rationale) {
        std::string text;
        for (std::size_t j = 0; j < i; ++j) {
          if (!text.empty()) text += '\n';
          text += lines[j];
        }
        *rationale = trim(text);
      }
      break;
    }
  }

  std::vector<std::string> candidates;
  if (!inline_first.empty()) candidates.push_back(inline_first);
  for (std::size_t i = first_action; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i].rfind("```", 0) == 0) continue;
    candidates.push_back(strip_decoration(lines[i]));
  }
  candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                  [](const std::string& c) { return c.empty(); }),
                   candidates.end());

  if (candidates.empty()) {
    throw BackendError(BackendErrorKind::Unparseable, "response contains no action line");
  }
  if (candidates.size() == 1 && lower(candidates.front()) == "none") return {};

  ActionList actions;
  for (const auto& c : candidates) {
    auto action = parse_line(c);
    if (!action) {
      throw BackendError(BackendErrorKind::Unparseable, fmt::format("malformed action line '{}'", c));
    }
    actions.push_back(*action);
  }
  return actions;
}

ActionList canonicalize(ActionList actions, const PlantTopology& topology) {
  std::vector<std::string> ids;
  for (const auto& v : topology.valves) ids.push_back(v.id);
  ids.push_back(topology.pump.id);
  for (auto& a : actions) {
    const std::string key = lower(a.actuator);
    for (const auto& id : ids) {
      if (lower(id) == key) {
        a.actuator = id;
        break;
      }
    }
  }
  return actions;
}

}  // namespace twinloop

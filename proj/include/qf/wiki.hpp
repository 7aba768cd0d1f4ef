#pragma once

// MediaWiki markup to plain text. Covers the constructs found on monster
// pages: links, templates, headings, tables, comments, refs and emphasis.
// Anything unrecognized passes through as text.

#include <cctype>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qf/bestiary.hpp"

namespace qf {

struct IngestResult {
  std::string text;
  int warnings = 0;  // unbalanced constructs stripped best-effort
};

namespace wiki_detail {

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) return false;
  }
  return true;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string strip_comments(std::string_view in) {
  std::string out;
  std::size_t i = 0;
  while (i < in.size()) {
    auto open = in.find("<!--", i);
    if (open == std::string_view::npos) {
      out.append(in.substr(i));
      break;
    }
    out.append(in.substr(i, open - i));
    auto close = in.find("-->", open + 4);
    if (close == std::string_view::npos) break;
    i = close + 3;
  }
  return out;
}

/// Drops <ref>…</ref> bodies, then removes remaining tags but keeps their text.
inline std::string strip_tags(std::string_view in) {
  std::string out;
  std::size_t i = 0;
  while (i < in.size()) {
    if (in[i] == '<' && starts_with_ci(in.substr(i), "<ref")) {
      auto gt = in.find('>', i);
      if (gt != std::string_view::npos) {
        if (in[gt - 1] == '/') {
          i = gt + 1;
          continue;
        }
        std::string rest(in.substr(gt + 1));
        std::size_t close = std::string::npos;
        for (std::size_t k = 0; k + 6 <= rest.size(); ++k) {
          if (starts_with_ci(std::string_view(rest).substr(k), "</ref>")) {
            close = k;
            break;
          }
        }
        if (close != std::string::npos) {
          i = gt + 1 + close + 6;
          continue;
        }
      }
    }
    if (in[i] == '<' && i + 1 < in.size() && (std::isalpha(static_cast<unsigned char>(in[i + 1])) || in[i + 1] == '/')) {
      auto gt = in.find('>', i);
      auto nl = in.find('\n', i);
      if (gt != std::string_view::npos && (nl == std::string_view::npos || gt < nl)) {
        out += ' ';
        i = gt + 1;
        continue;
      }
    }
    out += in[i++];
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view in) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    auto nl = in.find('\n', start);
    lines.emplace_back(in.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

/// Removes `{| … |}` blocks, which may nest.
inline std::string strip_tables(std::string_view in, int& warnings) {
  std::string out;
  int depth = 0;
  for (const auto& line : split_lines(in)) {
    const auto t = trim(line);
    if (t.rfind("{|", 0) == 0) {
      ++depth;
      continue;
    }
    if (depth > 0) {
      if (t.rfind("|}", 0) == 0) --depth;
      continue;
    }
    out += line;
    out += '\n';
  }
  if (depth > 0) ++warnings;
  return out;
}

/// Removes `{{ … }}` with nesting. An unclosed template is cut to end of line.
inline std::string strip_templates(std::string_view in, int& warnings) {
  std::string out;
  std::size_t i = 0;
  while (i < in.size()) {
    if (in.compare(i, 2, "{{") == 0) {
      int depth = 0;
      std::size_t j = i;
      while (j < in.size()) {
        if (in.compare(j, 2, "{{") == 0) {
          ++depth;
          j += 2;
        } else if (in.compare(j, 2, "}}") == 0) {
          --depth;
          j += 2;
          if (depth == 0) break;
        } else {
          ++j;
        }
      }
      if (depth == 0) {
        i = j;
      } else {
        ++warnings;
        auto nl = in.find('\n', i);
        i = nl == std::string_view::npos ? in.size() : nl;
      }
      continue;
    }
    out += in[i++];
  }
  return out;
}

/// Rewrites `[[target|label]]` → label and `[[target]]` → target; file and
/// category links vanish. Labels may themselves contain links.
inline std::string rewrite_links(std::string_view in, int& warnings);

inline std::string link_text(std::string_view body, int& warnings) {
  for (std::string_view drop : {"file:", "image:", "category:", "media:"}) {
    if (starts_with_ci(trim(body), drop)) return "";
  }
  // last top-level pipe
  int depth = 0;
  std::size_t pipe = std::string_view::npos;
  for (std::size_t k = 0; k < body.size(); ++k) {
    if (body.compare(k, 2, "[[") == 0) {
      ++depth;
      ++k;
    } else if (body.compare(k, 2, "]]") == 0) {
      --depth;
      ++k;
    } else if (body[k] == '|' && depth == 0) {
      pipe = k;
    }
  }
  auto shown = pipe == std::string_view::npos ? body : body.substr(pipe + 1);
  return rewrite_links(shown, warnings);
}

inline std::string rewrite_links(std::string_view in, int& warnings) {
  std::string out;
  std::size_t i = 0;
  while (i < in.size()) {
    if (in.compare(i, 2, "[[") == 0) {
      int depth = 0;
      std::size_t j = i;
      while (j < in.size()) {
        if (in.compare(j, 2, "[[") == 0) {
          ++depth;
          j += 2;
        } else if (in.compare(j, 2, "]]") == 0) {
          --depth;
          j += 2;
          if (depth == 0) break;
        } else {
          ++j;
        }
      }
      if (depth == 0) {
        out += link_text(in.substr(i + 2, j - i - 4), warnings);
        i = j;
      } else {
        ++warnings;
        i += 2;
      }
      continue;
    }
    // external link: [http://host label]
    if (in[i] == '[' && (starts_with_ci(in.substr(i + 1), "http://") || starts_with_ci(in.substr(i + 1), "https://"))) {
      auto close = in.find(']', i);
      if (close != std::string_view::npos) {
        auto body = in.substr(i + 1, close - i - 1);
        auto space = body.find(' ');
        if (space != std::string_view::npos) out += body.substr(space + 1);
        i = close + 1;
        continue;
      }
    }
    out += in[i++];
  }
  return out;
}

/// Headings lose their `=` fences; list and indent markers are dropped.
inline std::string rewrite_lines(std::string_view in) {
  std::string out;
  for (const auto& raw : split_lines(in)) {
    auto line = trim(raw);
    if (line.size() >= 2 && line.front() == '=' && line.back() == '=') {
      std::size_t b = 0, e = line.size();
      while (b < e && line[b] == '=') ++b;
      while (e > b && line[e - 1] == '=') --e;
      line = trim(std::string_view(line).substr(b, e - b));
    }
    std::size_t b = 0;
    while (b < line.size() && (line[b] == '*' || line[b] == '#' || line[b] == ':' || line[b] == ';' ||
                               std::isspace(static_cast<unsigned char>(line[b])))) {
      ++b;
    }
    if (line.rfind("----", 0) == 0) continue;
    out += line.substr(b);
    out += '\n';
  }
  return out;
}

/// Removes emphasis quotes and any stray markup fences, then collapses all
/// whitespace to single spaces.
inline std::string finish(std::string_view in) {
  std::string s;
  for (std::size_t i = 0; i < in.size();) {
    if (in[i] == '\'' && i + 1 < in.size() && in[i + 1] == '\'') {
      while (i < in.size() && in[i] == '\'') ++i;
      continue;
    }
    s += in[i++];
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (std::string_view fence : {"{{", "}}", "[[", "]]", "==", "{|", "|}"}) {
      for (auto pos = s.find(fence); pos != std::string::npos; pos = s.find(fence)) {
        s.erase(pos, fence.size());
        changed = true;
      }
    }
  }
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

inline std::string ingest_pass(std::string_view raw, int& warnings) {
  auto s = strip_comments(raw);
  s = strip_tags(s);
  s = strip_tables(s, warnings);
  s = strip_templates(s, warnings);
  s = rewrite_links(s, warnings);
  s = rewrite_lines(s);
  return finish(s);
}

}  // namespace wiki_detail

/// Converts wiki markup to single-spaced plain text. Passes repeat until the
/// text stops changing, so ingesting already-ingested text is a no-op.
inline IngestResult ingest_wiki_markup_with_warnings(std::string_view raw) {
  IngestResult result;
  result.text = wiki_detail::ingest_pass(raw, result.warnings);
  for (int pass = 0; pass < 32; ++pass) {
    int ignored = 0;
    auto next = wiki_detail::ingest_pass(result.text, ignored);
    if (next == result.text) break;
    result.text = std::move(next);
  }
  return result;
}

inline std::string ingest_wiki_markup(std::string_view raw) { return ingest_wiki_markup_with_warnings(raw).text; }

/// Reads `<MonsterName>.wiki` files for every labeled monster that has one.
/// Underscores in file names stand for spaces.
inline Corpus ingest_wiki_directory(const std::filesystem::path& dir, const Bestiary& labels, int* warnings = nullptr) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("wiki directory not found: " + dir.string());
  Corpus corpus;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".wiki") continue;
    auto title = entry.path().stem().string();
    for (auto& c : title) c = c == '_' ? ' ' : c;
    const auto* monster = labels.find(title);
    if (monster == nullptr) continue;
    auto result = ingest_wiki_markup_with_warnings(read_file(entry.path()));
    if (warnings != nullptr) *warnings += result.warnings;
    if (result.text.empty()) continue;
    corpus.emplace(monster->id, Document{monster->id, monster->name, std::move(result.text), DocumentSource::IngestedWiki});
  }
  return corpus;
}

}  // namespace qf

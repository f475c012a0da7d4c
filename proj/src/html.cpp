#include <algorithm>
#include <cctype>
#include <map>

#include "ct/dataset.hpp"

namespace ct {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_ws(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

// Replaces invalid UTF-8 sequences with U+FFFD.
std::string utf8_lossy(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    auto c = static_cast<unsigned char>(in[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    bool ok = len > 0 && i + len <= in.size();
    for (std::size_t k = 1; ok && k < len; ++k) ok = (static_cast<unsigned char>(in[i + k]) & 0xC0) == 0x80;
    if (ok && len == 2) ok = c >= 0xC2;
    if (ok) {
      out.append(in.substr(i, len));
      i += len;
    } else {
      out += "\xEF\xBF\xBD";
      ++i;
    }
  }
  return out;
}

void append_codepoint(std::string& out, unsigned long cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

}  // namespace

std::string decode_entities(std::string_view s) {
  static const std::map<std::string, std::string, std::less<>> kNamed = {
      {"amp", "&"},   {"lt", "<"},        {"gt", ">"},        {"quot", "\""},     {"apos", "'"},
      {"nbsp", " "},  {"mdash", "—"},     {"ndash", "–"},     {"hellip", "…"},    {"rsquo", "’"},
      {"lsquo", "‘"}, {"rdquo", "”"},     {"ldquo", "“"},     {"copy", "©"},
  };
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    auto semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += s[i++];
      continue;
    }
    auto name = s.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      unsigned long cp = 0;
      bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
      auto digits = name.substr(hex ? 2 : 1);
      bool ok = !digits.empty();
      for (char c : digits) {
        if (hex ? !std::isxdigit(static_cast<unsigned char>(c)) : !std::isdigit(static_cast<unsigned char>(c))) ok = false;
      }
      if (ok) {
        cp = std::stoul(std::string(digits), nullptr, hex ? 16 : 10);
        append_codepoint(out, cp);
        i = semi + 1;
        continue;
      }
    } else if (auto it = kNamed.find(name); it != kNamed.end()) {
      out += it->second;
      i = semi + 1;
      continue;
    }
    out += s[i++];
  }
  return out;
}

namespace {

const std::set<std::string>& skipped_elements() {
  static const std::set<std::string> s = {"script", "style", "nav",    "header", "footer",   "noscript", "aside",
                                          "form",   "iframe", "svg",   "head",   "template", "button",   "select"};
  return s;
}

const std::set<std::string>& block_elements() {
  static const std::set<std::string> s = {"p",       "div",  "article", "section", "main",       "body", "li",
                                          "ul",      "ol",   "h1",      "h2",      "h3",         "h4",   "h5",
                                          "h6",      "td",   "tr",      "table",   "blockquote", "pre",  "figure",
                                          "figcaption", "html", "dl", "dd", "dt"};
  return s;
}

// Elements whose text is a paragraph of their parent container.
bool is_paragraph(const std::string& tag) {
  return tag == "p" || tag == "li" || tag == "blockquote" || tag == "pre" || tag == "dd" || tag == "dt" ||
         tag == "figcaption" || (tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6');
}

bool is_heading(const std::string& tag) { return tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6'; }

struct Block {
  std::string tag;
  std::size_t id;
  std::size_t container;  // where this block's own text is grouped
};

struct Paragraph {
  std::size_t container;
  std::string text;
};

std::string collapse_ws(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_ws(static_cast<unsigned char>(c))) {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

}  // namespace

std::string html_to_text(std::string_view raw) {
  if (raw.find('\0') != std::string_view::npos) throw DatasetError("html_to_text: binary input (NUL bytes)");
  if (raw.size() >= 2 && ((raw[0] == '\xFF' && raw[1] == '\xFE') || (raw[0] == '\xFE' && raw[1] == '\xFF'))) {
    throw DatasetError("html_to_text: UTF-16 input is not supported");
  }
  const std::string html = utf8_lossy(raw);

  std::vector<Block> stack{{"#root", 0, 0}};
  std::size_t next_id = 1;
  std::vector<Paragraph> paragraphs;
  std::string current;
  bool in_heading = false;

  auto flush = [&] {
    auto text = collapse_ws(decode_entities(current));
    current.clear();
    if (in_heading || text.empty()) return;
    paragraphs.push_back({stack.back().container, std::move(text)});
  };

  std::size_t i = 0;
  const std::size_t n = html.size();
  while (i < n) {
    if (html[i] != '<') {
      auto next = html.find('<', i);
      if (next == std::string::npos) next = n;
      current.append(html, i, next - i);
      i = next;
      continue;
    }
    if (html.compare(i, 4, "<!--") == 0) {
      auto end = html.find("-->", i + 4);
      i = end == std::string::npos ? n : end + 3;
      continue;
    }
    if (i + 1 < n && (html[i + 1] == '!' || html[i + 1] == '?')) {
      auto end = html.find('>', i);
      i = end == std::string::npos ? n : end + 1;
      continue;
    }
    bool closing = i + 1 < n && html[i + 1] == '/';
    std::size_t name_start = i + (closing ? 2 : 1);
    std::size_t j = name_start;
    while (j < n && (std::isalnum(static_cast<unsigned char>(html[j])) || html[j] == '-')) ++j;
    if (j == name_start) {
      // A lone '<' in text.
      current += '<';
      ++i;
      continue;
    }
    std::string tag = lower(std::string_view(html).substr(name_start, j - name_start));
    auto gt = html.find('>', j);
    if (gt == std::string::npos) break;
    bool self_closing = gt > 0 && html[gt - 1] == '/';
    i = gt + 1;

    if (!closing && skipped_elements().contains(tag) && !self_closing) {
      // Skip through the matching close tag, counting nested openings.
      int depth = 1;
      std::size_t k = i;
      while (depth > 0) {
        auto lt = html.find('<', k);
        if (lt == std::string::npos) {
          k = n;
          break;
        }
        bool c = lt + 1 < n && html[lt + 1] == '/';
        std::size_t s = lt + (c ? 2 : 1), e = s;
        while (e < n && (std::isalnum(static_cast<unsigned char>(html[e])) || html[e] == '-')) ++e;
        auto t = lower(std::string_view(html).substr(s, e - s));
        auto close = html.find('>', e);
        if (close == std::string::npos) {
          k = n;
          break;
        }
        k = close + 1;
        if (t != tag) continue;
        if (c) {
          --depth;
        } else if (tag != "script" && tag != "style" && html[close - 1] != '/') {
          ++depth;
        }
      }
      i = k;
      continue;
    }
    if (tag == "br") {
      current += ' ';
      continue;
    }
    if (!block_elements().contains(tag)) {
      current += ' ';
      continue;
    }
    flush();
    if (closing) {
      auto it = std::find_if(stack.rbegin(), stack.rend(), [&](const Block& b) { return b.tag == tag; });
      if (it != stack.rend()) stack.erase(std::prev(it.base()), stack.end());
      if (stack.empty()) stack.push_back({"#root", 0, 0});
    } else if (!self_closing) {
      // A paragraph cannot contain another block; an unclosed <p> ends here.
      if (stack.back().tag == "p") stack.pop_back();
      std::size_t id = next_id++;
      std::size_t container = is_paragraph(tag) ? stack.back().container : id;
      stack.push_back({tag, id, container});
    }
    in_heading = std::any_of(stack.begin(), stack.end(), [](const Block& b) { return is_heading(b.tag); });
  }
  flush();

  std::map<std::size_t, std::size_t> volume;
  for (const auto& p : paragraphs) volume[p.container] += p.text.size();
  if (volume.empty()) return {};
  std::size_t best = 0, best_volume = 0;
  for (const auto& p : paragraphs) {
    // First container to reach the maximum wins, in document order.
    if (volume[p.container] > best_volume) {
      best_volume = volume[p.container];
      best = p.container;
    }
  }
  std::string out;
  for (const auto& p : paragraphs) {
    if (p.container != best) continue;
    if (!out.empty()) out += '\n';
    out += p.text;
  }
  return out;
}

}  // namespace ct

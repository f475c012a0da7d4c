#include <algorithm>
#include <cctype>
#include <map>

#include "ct/dataset.hpp"

namespace ct {

namespace {

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::size_t find_ci(std::string_view s, std::string_view needle, std::size_t from) {
  for (std::size_t i = from; i + needle.size() <= s.size(); ++i) {
    if (starts_with_ci(s, i, needle)) return i;
  }
  return std::string_view::npos;
}

// Position just past the close delimiter balancing the open one at `pos`.
std::size_t match_nested(std::string_view s, std::size_t pos, std::string_view open, std::string_view close) {
  int depth = 0;
  std::size_t i = pos;
  while (i < s.size()) {
    if (s.compare(i, open.size(), open) == 0) {
      ++depth;
      i += open.size();
    } else if (s.compare(i, close.size(), close) == 0) {
      --depth;
      i += close.size();
      if (depth == 0) return i;
    } else {
      ++i;
    }
  }
  return std::string_view::npos;
}

std::size_t url_end(std::string_view s, std::size_t from) {
  std::size_t e = from;
  while (e < s.size() && !std::isspace(static_cast<unsigned char>(s[e])) && s[e] != '|' && s[e] != ']' &&
         s[e] != '}' && s[e] != '<' && s[e] != '"') {
    ++e;
  }
  return e;
}

// URL carried by a citation body: a template url= parameter, then a bracketed
// external link, then any bare http(s) URL.
std::string citation_url(std::string_view body) {
  for (std::size_t bar = body.find('|'); bar != std::string_view::npos; bar = body.find('|', bar + 1)) {
    std::size_t k = bar + 1;
    while (k < body.size() && std::isspace(static_cast<unsigned char>(body[k]))) ++k;
    if (!starts_with_ci(body, k, "url")) continue;
    k += 3;
    while (k < body.size() && std::isspace(static_cast<unsigned char>(body[k]))) ++k;
    if (k >= body.size() || body[k] != '=') continue;
    ++k;
    while (k < body.size() && std::isspace(static_cast<unsigned char>(body[k]))) ++k;
    auto e = url_end(body, k);
    if (e > k) return std::string(body.substr(k, e - k));
  }
  for (std::string_view scheme : {"[http://", "[https://", "[//"}) {
    auto p = find_ci(body, scheme, 0);
    if (p != std::string_view::npos) return std::string(body.substr(p + 1, url_end(body, p + 1) - p - 1));
  }
  for (std::string_view scheme : {"http://", "https://"}) {
    auto p = find_ci(body, scheme, 0);
    if (p != std::string_view::npos) return std::string(body.substr(p, url_end(body, p) - p));
  }
  return {};
}

// Value of name= in a tag's attribute text, quotes removed.
std::string ref_name(std::string_view attrs) {
  auto p = find_ci(attrs, "name", 0);
  if (p == std::string_view::npos) return {};
  p += 4;
  while (p < attrs.size() && std::isspace(static_cast<unsigned char>(attrs[p]))) ++p;
  if (p >= attrs.size() || attrs[p] != '=') return {};
  ++p;
  while (p < attrs.size() && std::isspace(static_cast<unsigned char>(attrs[p]))) ++p;
  if (p >= attrs.size()) return {};
  char q = attrs[p];
  if (q == '"' || q == '\'') {
    auto e = attrs.find(q, p + 1);
    if (e == std::string_view::npos) return {};
    return std::string(attrs.substr(p + 1, e - p - 1));
  }
  std::size_t e = p;
  while (e < attrs.size() && !std::isspace(static_cast<unsigned char>(attrs[e])) && attrs[e] != '/' && attrs[e] != '>') ++e;
  return std::string(attrs.substr(p, e - p));
}

bool is_ref_open(std::string_view s, std::size_t i) {
  if (!starts_with_ci(s, i, "<ref")) return false;
  if (i + 4 >= s.size()) return false;
  char c = s[i + 4];
  return c == '>' || c == '/' || std::isspace(static_cast<unsigned char>(c));
}

// Links whose content is not prose.
bool is_media_link(std::string_view inner) {
  for (std::string_view ns : {"file:", "image:", "category:", "media:"}) {
    if (starts_with_ci(inner, 0, ns)) return true;
  }
  return false;
}

std::string strip_inline(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
      while (i + 1 < s.size() && s[i + 1] == '\'') ++i;
      continue;
    }
    out += s[i];
  }
  return out;
}

std::map<std::string, std::string> collect_named_refs(std::string_view s) {
  std::map<std::string, std::string> named;
  for (std::size_t i = find_ci(s, "<ref", 0); i != std::string_view::npos; i = find_ci(s, "<ref", i + 4)) {
    if (!is_ref_open(s, i)) continue;
    auto gt = s.find('>', i);
    if (gt == std::string_view::npos) break;
    if (s[gt - 1] == '/') continue;
    auto name = ref_name(s.substr(i + 4, gt - i - 4));
    auto close = find_ci(s, "</ref>", gt);
    if (name.empty() || close == std::string_view::npos) continue;
    auto url = citation_url(s.substr(gt + 1, close - gt - 1));
    if (!url.empty()) named.emplace(name, url);
  }
  return named;
}

}  // namespace

PlainArticle strip_wikitext(std::string_view s) {
  PlainArticle art;
  const auto named = collect_named_refs(s);
  auto& out = art.text;
  auto line_end = [&](std::size_t from) {
    auto e = s.find('\n', from);
    return e == std::string_view::npos ? s.size() : e;
  };
  auto at_line_start = [&](std::size_t i) { return i == 0 || s[i - 1] == '\n'; };

  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, 4, "<!--") == 0) {
      auto e = s.find("-->", i + 4);
      i = e == std::string_view::npos ? s.size() : e + 3;
      continue;
    }
    if (is_ref_open(s, i)) {
      auto gt = s.find('>', i);
      if (gt == std::string_view::npos) {
        art.diagnostics.push_back("unterminated <ref tag at byte " + std::to_string(i));
        i = line_end(i);
        continue;
      }
      auto attrs = s.substr(i + 4, gt - i - 4);
      if (s[gt - 1] == '/') {
        auto name = ref_name(attrs);
        auto it = named.find(name);
        if (it != named.end()) {
          art.anchors.push_back({out.size(), it->second});
        } else {
          art.diagnostics.push_back("unresolved named ref '" + name + "' at byte " + std::to_string(i));
        }
        i = gt + 1;
        continue;
      }
      auto close = find_ci(s, "</ref>", gt);
      auto next_open = find_ci(s, "<ref", gt);
      if (close == std::string_view::npos || (next_open != std::string_view::npos && next_open < close)) {
        art.diagnostics.push_back("unclosed <ref> at byte " + std::to_string(i));
        i = line_end(gt);
        continue;
      }
      auto url = citation_url(s.substr(gt + 1, close - gt - 1));
      if (url.empty()) {
        art.diagnostics.push_back("citation without URL at byte " + std::to_string(i));
      } else {
        art.anchors.push_back({out.size(), std::move(url)});
      }
      i = close + 6;
      continue;
    }
    if (s.compare(i, 2, "{{") == 0) {
      auto e = match_nested(s, i, "{{", "}}");
      if (e == std::string_view::npos) {
        art.diagnostics.push_back("unbalanced template at byte " + std::to_string(i));
        i = line_end(i);
      } else {
        i = e;
      }
      continue;
    }
    if (at_line_start(i) && s.compare(i, 2, "{|") == 0) {
      auto e = match_nested(s, i, "{|", "|}");
      i = e == std::string_view::npos ? s.size() : e;
      continue;
    }
    if (s.compare(i, 2, "[[") == 0) {
      auto e = match_nested(s, i, "[[", "]]");
      if (e == std::string_view::npos) {
        art.diagnostics.push_back("unbalanced link at byte " + std::to_string(i));
        i += 2;
        continue;
      }
      auto inner = s.substr(i + 2, e - i - 4);
      i = e;
      if (is_media_link(inner)) continue;
      auto bar = inner.rfind('|');
      out += strip_inline(bar == std::string_view::npos ? inner : inner.substr(bar + 1));
      continue;
    }
    if (s[i] == '[' && (starts_with_ci(s, i + 1, "http") || s.compare(i + 1, 2, "//") == 0)) {
      auto e = s.find(']', i);
      if (e == std::string_view::npos) {
        ++i;
        continue;
      }
      auto inner = s.substr(i + 1, e - i - 1);
      auto sp = inner.find(' ');
      if (sp != std::string_view::npos) out += strip_inline(inner.substr(sp + 1));
      i = e + 1;
      continue;
    }
    if (s[i] == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
      while (i < s.size() && s[i] == '\'') ++i;
      continue;
    }
    if (at_line_start(i) && s[i] == '=') {
      // Heading line.
      i = line_end(i);
      out += '\n';
      continue;
    }
    if (at_line_start(i) && (s[i] == '*' || s[i] == '#' || s[i] == ':' || s[i] == ';')) {
      while (i < s.size() && (s[i] == '*' || s[i] == '#' || s[i] == ':' || s[i] == ';')) ++i;
      continue;
    }
    if (s.compare(i, 2, "__") == 0) {
      auto e = s.find("__", i + 2);
      if (e != std::string_view::npos && e - i < 24) {
        i = e + 2;
        continue;
      }
    }
    if (s[i] == '<') {
      auto gt = s.find('>', i);
      if (gt != std::string_view::npos && gt - i < 200) {
        for (std::string_view skip : {"math", "gallery", "timeline", "score", "syntaxhighlight"}) {
          if (starts_with_ci(s, i + 1, skip)) {
            auto close = find_ci(s, std::string("</") + std::string(skip), gt);
            gt = close == std::string_view::npos ? gt : s.find('>', close);
            break;
          }
        }
        out += ' ';
        i = gt + 1;
        continue;
      }
    }
    if (s[i] == '&') {
      auto semi = s.find(';', i);
      if (semi != std::string_view::npos && semi - i <= 10) {
        auto decoded = decode_entities(s.substr(i, semi - i + 1));
        if (decoded != s.substr(i, semi - i + 1)) {
          out += decoded;
          i = semi + 1;
          continue;
        }
      }
    }
    out += s[i++];
  }
  return art;
}

namespace {

std::string collapse(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
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

CitationExtraction extract_citation_instances(std::string_view wikitext, const DomainWhitelist& whitelist,
                                              std::size_t k) {
  CitationExtraction res;
  auto art = strip_wikitext(wikitext);
  res.diagnostics = std::move(art.diagnostics);
  auto sentences = split_sentences(art.text);
  for (const auto& anchor : art.anchors) {
    if (!whitelist.matches_url(anchor.url)) continue;
    // The sentence containing the anchor, else the last one ending before it.
    std::ptrdiff_t idx = -1;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      const auto& sp = sentences.spans[s];
      if (sp.begin < anchor.offset && anchor.offset <= sp.end) {
        idx = static_cast<std::ptrdiff_t>(s);
        break;
      }
      if (sp.end <= anchor.offset) idx = static_cast<std::ptrdiff_t>(s);
    }
    if (idx < 0) {
      res.diagnostics.push_back("citation " + anchor.url + " precedes all text");
      continue;
    }
    auto u = static_cast<std::size_t>(idx);
    RawCitation c;
    c.update = collapse(sentence_text(art.text, sentences, u));
    std::size_t first = u >= k ? u - k : 0;
    for (std::size_t s = first; s < u; ++s) {
      if (!c.context.empty()) c.context += ' ';
      c.context += collapse(sentence_text(art.text, sentences, s));
    }
    c.citation_url = anchor.url;
    c.sentence_index = u;
    res.citations.push_back(std::move(c));
  }
  return res;
}

}  // namespace ct

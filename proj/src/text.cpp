#include "acrodis/text.hpp"

#include <array>
#include <unordered_map>

namespace acrodis::text {

std::vector<uint32_t> decode_utf8(std::string_view s) {
  std::vector<uint32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    uint32_t cp = 0xFFFD;
    size_t len = 1;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      break;
    }
    bool ok = true;
    for (size_t k = 1; k < len; ++k) {
      const auto bk = static_cast<unsigned char>(s[i + k]);
      if ((bk & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (bk & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(const std::vector<uint32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (uint32_t cp : cps) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

namespace {

// (base << 32 | combining mark) -> precomposed codepoint
const std::unordered_map<uint64_t, uint32_t>& composition_table() {
  static const std::unordered_map<uint64_t, uint32_t> table = [] {
    std::unordered_map<uint64_t, uint32_t> t;
    auto add = [&t](uint32_t base, uint32_t mark, uint32_t composed) {
      t[(static_cast<uint64_t>(base) << 32) | mark] = composed;
    };
    // grave
    add('A', 0x300, 0x00C0); add('E', 0x300, 0x00C8); add('I', 0x300, 0x00CC);
    add('O', 0x300, 0x00D2); add('U', 0x300, 0x00D9);
    add('a', 0x300, 0x00E0); add('e', 0x300, 0x00E8); add('i', 0x300, 0x00EC);
    add('o', 0x300, 0x00F2); add('u', 0x300, 0x00F9);
    // acute
    add('A', 0x301, 0x00C1); add('E', 0x301, 0x00C9); add('I', 0x301, 0x00CD);
    add('O', 0x301, 0x00D3); add('U', 0x301, 0x00DA); add('Y', 0x301, 0x00DD);
    add('a', 0x301, 0x00E1); add('e', 0x301, 0x00E9); add('i', 0x301, 0x00ED);
    add('o', 0x301, 0x00F3); add('u', 0x301, 0x00FA); add('y', 0x301, 0x00FD);
    // circumflex
    add('A', 0x302, 0x00C2); add('E', 0x302, 0x00CA); add('I', 0x302, 0x00CE);
    add('O', 0x302, 0x00D4); add('U', 0x302, 0x00DB);
    add('a', 0x302, 0x00E2); add('e', 0x302, 0x00EA); add('i', 0x302, 0x00EE);
    add('o', 0x302, 0x00F4); add('u', 0x302, 0x00FB);
    // tilde
    add('A', 0x303, 0x00C3); add('N', 0x303, 0x00D1); add('O', 0x303, 0x00D5);
    add('a', 0x303, 0x00E3); add('n', 0x303, 0x00F1); add('o', 0x303, 0x00F5);
    // diaeresis
    add('A', 0x308, 0x00C4); add('E', 0x308, 0x00CB); add('I', 0x308, 0x00CF);
    add('O', 0x308, 0x00D6); add('U', 0x308, 0x00DC); add('Y', 0x308, 0x0178);
    add('a', 0x308, 0x00E4); add('e', 0x308, 0x00EB); add('i', 0x308, 0x00EF);
    add('o', 0x308, 0x00F6); add('u', 0x308, 0x00FC); add('y', 0x308, 0x00FF);
    // ring above, cedilla
    add('A', 0x30A, 0x00C5); add('a', 0x30A, 0x00E5);
    add('C', 0x327, 0x00C7); add('c', 0x327, 0x00E7);
    // caron
    add('S', 0x30C, 0x0160); add('s', 0x30C, 0x0161);
    add('Z', 0x30C, 0x017D); add('z', 0x30C, 0x017E);
    // macron
    add('A', 0x304, 0x0100); add('a', 0x304, 0x0101);
    add('E', 0x304, 0x0112); add('e', 0x304, 0x0113);
    add('I', 0x304, 0x012A); add('i', 0x304, 0x012B);
    add('O', 0x304, 0x014C); add('o', 0x304, 0x014D);
    add('U', 0x304, 0x016A); add('u', 0x304, 0x016B);
    return t;
  }();
  return table;
}

bool is_combining_mark(uint32_t cp) { return cp >= 0x300 && cp <= 0x36F; }

uint32_t lower_cp(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  // Latin-1 Supplement uppercase, skipping the multiplication sign
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
  switch (cp) {
    case 0x0152: return 0x0153;  // OE ligature
    case 0x0178: return 0x00FF;  // Y with diaeresis
    case 0x0160: return 0x0161;
    case 0x017D: return 0x017E;
    case 0x0100: return 0x0101;
    case 0x0112: return 0x0113;
    case 0x012A: return 0x012B;
    case 0x014C: return 0x014D;
    case 0x016A: return 0x016B;
    default: return cp;
  }
}

}  // namespace

std::string nfc(std::string_view s) {
  const auto cps = decode_utf8(s);
  std::vector<uint32_t> out;
  out.reserve(cps.size());
  const auto& table = composition_table();
  for (uint32_t cp : cps) {
    if (is_combining_mark(cp) && !out.empty()) {
      const uint64_t key = (static_cast<uint64_t>(out.back()) << 32) | cp;
      auto it = table.find(key);
      if (it != table.end()) {
        out.back() = it->second;
        continue;
      }
    }
    out.push_back(cp);
  }
  return encode_utf8(out);
}

std::string to_lower(std::string_view s) {
  auto cps = decode_utf8(s);
  for (auto& cp : cps) cp = lower_cp(cp);
  return encode_utf8(cps);
}

std::string normalize_token(std::string_view s) { return to_lower(nfc(s)); }

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < s.size()) {
    while (i < s.size() && is_ws(s[i])) ++i;
    size_t j = i;
    while (j < s.size() && !is_ws(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace acrodis::text

#!/usr/bin/env python3
"""Regenerates include/rtlm/default_lexicon.hpp from data/lexicon.txt."""
import pathlib

root = pathlib.Path(__file__).resolve().parent.parent
text = (root / "data" / "lexicon.txt").read_text(encoding="utf-8")
assert ")lex\"" not in text
out = f'''#pragma once

// Generated from data/lexicon.txt by tools/embed_lexicon.py. Do not edit.

#include <string_view>

namespace rtlm::textfeat {{

inline constexpr std::string_view kDefaultLexiconText = R"lex({text})lex";

}}  // namespace rtlm::textfeat
'''
(root / "include" / "rtlm" / "default_lexicon.hpp").write_text(out, encoding="utf-8")

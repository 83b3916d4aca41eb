#pragma once

// Shared test helpers: a small XML well-formedness checker (tag balance,
// quoted attributes, sane entities) and element counting/extraction for
// MusicXML assertions. Independent of the exporter on purpose.

#include <cctype>
#include <string>
#include <vector>

namespace testsupport {

struct XmlCheck {
    bool ok = true;
    std::string error;
};

inline XmlCheck check_xml_well_formed(const std::string& xml) {
    auto fail = [](const std::string& msg) { return XmlCheck{false, msg}; };
    std::vector<std::string> stack;
    size_t i = 0;
    size_t n = xml.size();
    bool seen_root = false;

    auto check_entity = [&](size_t at) -> bool {
        size_t semi = xml.find(';', at);
        if (semi == std::string::npos || semi - at > 8)
            return false;
        std::string ent = xml.substr(at + 1, semi - at - 1);
        if (ent == "amp" || ent == "lt" || ent == "gt" || ent == "quot" || ent == "apos")
            return true;
        if (ent.size() > 1 && ent[0] == '#')
            return true;
        return false;
    };

    while (i < n) {
        if (xml[i] == '&') {
            if (!check_entity(i))
                return fail("bad entity at offset " + std::to_string(i));
            i = xml.find(';', i) + 1;
            continue;
        }
        if (xml[i] != '<') {
            if (xml[i] == '>')
                return fail("stray '>' at offset " + std::to_string(i));
            ++i;
            continue;
        }
        if (xml.compare(i, 2, "<?") == 0) {
            size_t end = xml.find("?>", i);
            if (end == std::string::npos)
                return fail("unterminated processing instruction");
            i = end + 2;
            continue;
        }
        if (xml.compare(i, 4, "<!--") == 0) {
            size_t end = xml.find("-->", i);
            if (end == std::string::npos)
                return fail("unterminated comment");
            i = end + 3;
            continue;
        }
        if (xml.compare(i, 2, "<!") == 0) { // DOCTYPE
            size_t end = xml.find('>', i);
            if (end == std::string::npos)
                return fail("unterminated doctype");
            i = end + 1;
            continue;
        }
        bool closing = xml.compare(i, 2, "</") == 0;
        size_t name_start = i + (closing ? 2 : 1);
        size_t j = name_start;
        while (j < n && (std::isalnum(static_cast<unsigned char>(xml[j])) || xml[j] == '-' ||
                         xml[j] == '_' || xml[j] == ':'))
            ++j;
        if (j == name_start)
            return fail("empty tag name at offset " + std::to_string(i));
        std::string name = xml.substr(name_start, j - name_start);

        // attributes
        bool self_closing = false;
        while (j < n && xml[j] != '>') {
            if (xml[j] == '/' && j + 1 < n && xml[j + 1] == '>') {
                self_closing = true;
                j += 1;
                break;
            }
            if (std::isspace(static_cast<unsigned char>(xml[j]))) {
                ++j;
                continue;
            }
            if (closing)
                return fail("attributes on closing tag " + name);
            size_t attr_start = j;
            while (j < n && xml[j] != '=' && xml[j] != '>' &&
                   !std::isspace(static_cast<unsigned char>(xml[j])))
                ++j;
            if (j >= n || xml[j] != '=')
                return fail("attribute without value in <" + name + ">");
            ++j;
            if (j >= n || (xml[j] != '"' && xml[j] != '\''))
                return fail("unquoted attribute value in <" + name + ">");
            char quote = xml[j];
            size_t close = xml.find(quote, j + 1);
            if (close == std::string::npos)
                return fail("unterminated attribute value in <" + name + ">");
            (void)attr_start;
            j = close + 1;
        }
        if (j >= n)
            return fail("unterminated tag <" + name);
        i = j + 1;

        if (closing) {
            if (stack.empty() || stack.back() != name)
                return fail("mismatched closing tag </" + name + ">");
            stack.pop_back();
        } else if (!self_closing) {
            if (stack.empty() && seen_root)
                return fail("content after the root element");
            stack.push_back(name);
            seen_root = true;
        }
    }
    if (!stack.empty())
        return fail("unclosed tag <" + stack.back() + ">");
    if (!seen_root)
        return fail("no root element");
    return {};
}

inline int count_elements(const std::string& xml, const std::string& name) {
    int count = 0;
    std::string open = "<" + name;
    size_t pos = 0;
    while ((pos = xml.find(open, pos)) != std::string::npos) {
        char next = pos + open.size() < xml.size() ? xml[pos + open.size()] : '\0';
        if (next == '>' || next == ' ' || next == '/')
            ++count;
        pos += open.size();
    }
    return count;
}

// text contents of every <name>...</name> element, in document order
inline std::vector<std::string> element_texts(const std::string& xml, const std::string& name) {
    std::vector<std::string> out;
    std::string open = "<" + name + ">";
    std::string close = "</" + name + ">";
    size_t pos = 0;
    while ((pos = xml.find(open, pos)) != std::string::npos) {
        size_t start = pos + open.size();
        size_t end = xml.find(close, start);
        if (end == std::string::npos)
            break;
        out.push_back(xml.substr(start, end - start));
        pos = end + close.size();
    }
    return out;
}

} // namespace testsupport

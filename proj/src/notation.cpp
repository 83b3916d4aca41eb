#include "dizi/notation.hpp"

#include <cctype>
#include <stdexcept>

#include "dizi/pitch.hpp"
#include "dizi/util.hpp"

namespace dizi {

namespace {

struct Cursor {
    const std::string& text;
    size_t pos = 0;
    int line;
    int col = 1;

    Cursor(const std::string& t, int start_line) : text(t), line(start_line) {}

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    char get() {
        char c = text[pos++];
        if (c == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        return c;
    }
    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r' || peek() == '\n'))
            get();
    }
};

bool is_token_end(const Cursor& c) {
    if (c.eof())
        return true;
    char ch = c.peek();
    return ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n' || ch == '|';
}

struct BodyParser {
    Cursor cur;
    const TechniqueRegistry& registry;
    std::vector<Diagnostic> errors;

    std::vector<Measure> measures;
    Measure current;
    std::vector<std::pair<int, int>> measure_positions; // first token of each measure
    std::pair<int, int> current_start{0, 0};

    BodyParser(const std::string& body, int start_line, const TechniqueRegistry& reg)
        : cur(body, start_line), registry(reg) {}

    void fail(int line, int col, std::string msg) { errors.push_back({line, col, std::move(msg)}); }

    bool parse_note() {
        int line = cur.line, col = cur.col;
        if (current.notes.empty())
            current_start = {line, col};

        int accidental = 0;
        if (cur.peek() == '#' || cur.peek() == 'b') {
            accidental = cur.peek() == '#' ? 1 : -1;
            cur.get();
            if (cur.eof() || !std::isdigit(static_cast<unsigned char>(cur.peek()))) {
                fail(line, col, "expected a degree digit after accidental");
                return false;
            }
        }
        if (cur.eof() || !std::isdigit(static_cast<unsigned char>(cur.peek()))) {
            fail(line, col, std::string("unexpected character '") + cur.peek() + "'");
            return false;
        }
        char dc = cur.get();
        int degree = dc - '0';
        if (degree > 7) {
            fail(line, col, std::string("degree '") + dc + "' out of range 0..7");
            return false;
        }
        if (degree == 0 && accidental != 0) {
            fail(line, col, "a rest cannot carry an accidental");
            return false;
        }

        int octave_shift = 0;
        bool up = false, down = false;
        while (!cur.eof() && (cur.peek() == '\'' || cur.peek() == ',')) {
            int mline = cur.line, mcol = cur.col;
            char m = cur.get();
            if (degree == 0) {
                fail(mline, mcol, "a rest cannot carry octave marks");
                return false;
            }
            if (m == '\'') {
                up = true;
                ++octave_shift;
            } else {
                down = true;
                --octave_shift;
            }
            if (up && down) {
                fail(mline, mcol, "octave marks ' and , cannot be mixed on one note");
                return false;
            }
            if (octave_shift > 2 || octave_shift < -2) {
                fail(mline, mcol, "octave shift beyond +-2");
                return false;
            }
        }

        Rational duration{1};
        if (!cur.eof() && cur.peek() == '{') {
            int bline = cur.line, bcol = cur.col;
            cur.get();
            long long p = 0, q = 1;
            if (cur.eof() || !std::isdigit(static_cast<unsigned char>(cur.peek()))) {
                fail(bline, bcol, "expected a number inside '{'");
                return false;
            }
            while (!cur.eof() && std::isdigit(static_cast<unsigned char>(cur.peek())))
                p = p * 10 + (cur.get() - '0');
            if (!cur.eof() && cur.peek() == '/') {
                cur.get();
                q = 0;
                if (cur.eof() || !std::isdigit(static_cast<unsigned char>(cur.peek()))) {
                    fail(cur.line, cur.col, "expected a denominator after '/'");
                    return false;
                }
                while (!cur.eof() && std::isdigit(static_cast<unsigned char>(cur.peek())))
                    q = q * 10 + (cur.get() - '0');
            }
            if (cur.eof() || cur.peek() != '}') {
                fail(cur.line, cur.col, "expected '}' to close the duration");
                return false;
            }
            cur.get();
            if (p == 0 || q == 0) {
                fail(bline, bcol, "duration must be a positive rational");
                return false;
            }
            duration = Rational(p, q);
            if (!duration_denominator_supported(duration)) {
                fail(bline, bcol, "duration denominator " + std::to_string(duration.den) +
                                      " not in {1,2,3,4,6,8,12,16}");
                return false;
            }
        } else {
            int slashes = 0;
            int sline = cur.line, scol = cur.col;
            while (!cur.eof() && cur.peek() == '/') {
                cur.get();
                ++slashes;
            }
            if (slashes > 4) {
                fail(sline, scol, "more than four duration halvings are not representable");
                return false;
            }
            duration = Rational(1, 1LL << slashes);
            if (!cur.eof() && cur.peek() == '.') {
                int dline = cur.line, dcol = cur.col;
                cur.get();
                duration = duration * Rational(3, 2);
                if (!duration_denominator_supported(duration)) {
                    fail(dline, dcol, "dotted duration leaves the supported denominator set");
                    return false;
                }
            }
        }

        std::string technique = "none";
        if (!cur.eof() && cur.peek() == '!') {
            int tline = cur.line, tcol = cur.col;
            cur.get();
            std::string code;
            while (!cur.eof() && (std::islower(static_cast<unsigned char>(cur.peek())) ||
                                  std::isdigit(static_cast<unsigned char>(cur.peek())) ||
                                  cur.peek() == '_'))
                code += cur.get();
            if (code.empty()) {
                fail(tline, tcol, "expected a technique code after '!'");
                return false;
            }
            if (degree == 0) {
                fail(tline, tcol, "a rest cannot carry a technique tag");
                return false;
            }
            if (!registry.has(code)) {
                fail(tline, tcol, "unknown technique tag '" + code + "'");
                return false;
            }
            technique = code;
        }

        if (!is_token_end(cur)) {
            fail(cur.line, cur.col, std::string("unexpected character '") + cur.peek() + "' in note");
            return false;
        }

        current.notes.push_back({degree, accidental, octave_shift, duration, technique});
        return true;
    }

    bool parse() {
        while (true) {
            cur.skip_ws();
            if (cur.eof())
                break;
            char c = cur.peek();
            if (c == '|') {
                int line = cur.line, col = cur.col;
                cur.get();
                if (current.notes.empty()) {
                    fail(line, col, "empty measure");
                    return false;
                }
                measures.push_back(std::move(current));
                measure_positions.push_back(current_start);
                current = {};
            } else if (c == '-') {
                int line = cur.line, col = cur.col;
                cur.get();
                if (!is_token_end(cur)) {
                    fail(cur.line, cur.col, "'-' must stand alone");
                    return false;
                }
                if (current.notes.empty()) {
                    fail(line, col, "dash without a preceding note in this measure");
                    return false;
                }
                NoteEvent& prev = current.notes.back();
                prev.duration += Rational(1);
                if (!duration_denominator_supported(prev.duration)) {
                    fail(line, col, "extended duration leaves the supported denominator set");
                    return false;
                }
            } else {
                if (!parse_note())
                    return false;
            }
        }
        if (!current.notes.empty()) {
            measures.push_back(std::move(current));
            measure_positions.push_back(current_start);
        }
        return true;
    }
};

std::string strip_bom(const std::string& s) {
    if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF &&
        static_cast<unsigned char>(s[1]) == 0xBB && static_cast<unsigned char>(s[2]) == 0xBF)
        return s.substr(3);
    return s;
}

bool looks_like_header(const std::string& line, std::string& field, std::string& value) {
    size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
        ++i;
    size_t b = i;
    if (i >= line.size() || !std::isalpha(static_cast<unsigned char>(line[i])))
        return false;
    while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_'))
        ++i;
    size_t e = i;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
        ++i;
    if (i >= line.size() || line[i] != ':')
        return false;
    field = line.substr(b, e - b);
    value = trim(line.substr(i + 1));
    return true;
}

} // namespace

ParseResult parse_score(const std::string& source, const TechniqueRegistry& registry) {
    ParseResult result;
    std::string text = strip_bom(source);

    Score score;
    score.key = KeySignature{};
    score.time = TimeSignature{};

    // header phase
    std::vector<std::string> seen_fields;
    size_t pos = 0;
    int line_no = 0;
    size_t body_pos = std::string::npos;
    int body_line = 1;
    while (pos <= text.size()) {
        if (pos == text.size())
            break;
        size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        ++line_no;

        std::string trimmed = trim(line);
        std::string field, value;
        if (trimmed.empty()) {
            // blank line, keep scanning
        } else if (looks_like_header(line, field, value)) {
            for (const auto& f : seen_fields)
                if (f == field) {
                    result.diagnostics.push_back({line_no, 1, "duplicate header field '" + field + "'"});
                    return result;
                }
            seen_fields.push_back(field);
            if (field == "title") {
                score.title = value;
            } else if (field == "school") {
                auto s = school_from_name(value);
                if (!s) {
                    result.diagnostics.push_back(
                        {line_no, 1, "unknown school '" + value + "' (North, South or Other)"});
                    return result;
                }
                score.school = *s;
            } else if (field == "key") {
                if (!starts_with(value, "1=")) {
                    result.diagnostics.push_back({line_no, 1, "key must look like 'key: 1=C'"});
                    return result;
                }
                std::string rest = value.substr(2);
                size_t name_len = 0;
                while (name_len < rest.size() &&
                       !std::isdigit(static_cast<unsigned char>(rest[name_len])))
                    ++name_len;
                auto pc = pitch_class_from_name(rest.substr(0, name_len));
                if (!pc) {
                    result.diagnostics.push_back(
                        {line_no, 1, "unknown tonic '" + rest.substr(0, name_len) + "'"});
                    return result;
                }
                score.key.tonic_pc = *pc;
                if (name_len < rest.size()) {
                    int oct = 0;
                    for (size_t i = name_len; i < rest.size(); ++i) {
                        if (!std::isdigit(static_cast<unsigned char>(rest[i]))) {
                            result.diagnostics.push_back({line_no, 1, "bad reference octave in key"});
                            return result;
                        }
                        oct = oct * 10 + (rest[i] - '0');
                    }
                    if (oct > 8) {
                        result.diagnostics.push_back({line_no, 1, "reference octave out of range 0..8"});
                        return result;
                    }
                    score.key.reference_octave = oct;
                }
            } else if (field == "time") {
                size_t slash = value.find('/');
                bool ok = slash != std::string::npos && slash > 0 && slash + 1 < value.size();
                int beats = 0, unit = 0;
                if (ok) {
                    try {
                        beats = std::stoi(value.substr(0, slash));
                        unit = std::stoi(value.substr(slash + 1));
                    } catch (...) {
                        ok = false;
                    }
                }
                ok = ok && beats > 0 && unit > 0 && (unit & (unit - 1)) == 0;
                if (!ok) {
                    result.diagnostics.push_back(
                        {line_no, 1, "time must be '<beats>/<unit>' with a power-of-two unit"});
                    return result;
                }
                score.time = {beats, unit};
            } else {
                result.diagnostics.push_back({line_no, 1, "unknown header field '" + field + "'"});
                return result;
            }
        } else {
            body_pos = pos;
            body_line = line_no;
            break;
        }
        if (eol == std::string::npos)
            break;
        pos = eol + 1;
    }

    if (body_pos == std::string::npos) {
        result.diagnostics.push_back({line_no, 1, "score has no measures"});
        return result;
    }

    std::string body = text.substr(body_pos);
    BodyParser parser(body, body_line, registry);
    if (!parser.parse()) {
        result.diagnostics = std::move(parser.errors);
        return result;
    }
    if (parser.measures.empty()) {
        result.diagnostics.push_back({body_line, 1, "score has no measures"});
        return result;
    }
    score.measures = std::move(parser.measures);

    // measure duration check
    Rational capacity = score.time.quarters();
    size_t last = score.measures.size() - 1;
    for (size_t i = 0; i < score.measures.size(); ++i) {
        Rational sum = score.measures[i].total_duration();
        auto [mline, mcol] = parser.measure_positions[i];
        bool edge = i == 0 || i == last;
        if ((edge && sum > capacity) || (!edge && sum != capacity)) {
            result.diagnostics.push_back(
                {mline, mcol,
                 "measure " + std::to_string(i + 1) + " holds " + sum.str() +
                     " quarters, expected " + (edge ? "at most " : "") + capacity.str()});
        }
    }
    if (!result.diagnostics.empty())
        return result;

    result.score = std::move(score);
    return result;
}

namespace {

// Canonical duration rendering: empty for a quarter, slashes/dot for binary
// and dotted-binary values, n-1 dash tokens for integer n, else "{p/q}".
struct DurationText {
    std::string suffix;
    int dashes = 0;
};

DurationText render_duration(const Rational& d) {
    if (d.den == 1) {
        if (d.num == 1)
            return {"", 0};
        return {"", static_cast<int>(d.num - 1)};
    }
    if (d.num == 1) {
        switch (d.den) {
        case 2: return {"/", 0};
        case 4: return {"//", 0};
        case 8: return {"///", 0};
        case 16: return {"////", 0};
        default: break;
        }
    }
    if (d.num == 3) {
        switch (d.den) {
        case 2: return {".", 0};
        case 4: return {"/.", 0};
        case 8: return {"//.", 0};
        case 16: return {"///.", 0};
        default: break;
        }
    }
    return {"{" + d.str() + "}", 0};
}

std::string render_note(const NoteEvent& n) {
    std::string out;
    if (n.accidental == 1)
        out += '#';
    else if (n.accidental == -1)
        out += 'b';
    out += static_cast<char>('0' + n.degree);
    for (int i = 0; i < n.octave_shift; ++i)
        out += '\'';
    for (int i = 0; i > n.octave_shift; --i)
        out += ',';
    DurationText dt = render_duration(n.duration);
    out += dt.suffix;
    if (n.technique != "none")
        out += "!" + n.technique;
    for (int i = 0; i < dt.dashes; ++i)
        out += " -";
    return out;
}

} // namespace

std::string serialize_score(const Score& score) {
    std::string out;
    out += "title: " + score.title + "\n";
    out += std::string("school: ") + school_name(score.school) + "\n";
    out += "key: 1=" + std::string(pitch_class_name(score.key.tonic_pc));
    if (score.key.reference_octave != 4)
        out += std::to_string(score.key.reference_octave);
    out += "\n";
    out += "time: " + std::to_string(score.time.beats) + "/" +
           std::to_string(score.time.beat_unit) + "\n\n";

    for (size_t i = 0; i < score.measures.size(); ++i) {
        const Measure& m = score.measures[i];
        for (size_t j = 0; j < m.notes.size(); ++j) {
            if (j > 0)
                out += ' ';
            out += render_note(m.notes[j]);
        }
        out += " |";
        out += (i % 4 == 3 || i + 1 == score.measures.size()) ? "\n" : " ";
    }
    return out;
}

std::vector<Diagnostic> validate_measures(const Score& score) {
    std::vector<Diagnostic> out;
    if (score.measures.empty())
        return out;
    Rational capacity = score.time.quarters();
    size_t last = score.measures.size() - 1;
    for (size_t i = 0; i < score.measures.size(); ++i) {
        Rational sum = score.measures[i].total_duration();
        bool edge = i == 0 || i == last;
        if ((edge && sum > capacity) || (!edge && sum != capacity)) {
            out.push_back({0, 0,
                           "measure " + std::to_string(i + 1) + " holds " + sum.str() +
                               " quarters, expected " + (edge ? "at most " : "") + capacity.str()});
        }
    }
    return out;
}

Score parse_score_or_throw(const std::string& source, const TechniqueRegistry& registry) {
    ParseResult res = parse_score(source, registry);
    if (!res.ok()) {
        std::string msg = "parse error";
        for (const auto& d : res.diagnostics)
            msg += "\n  " + d.str();
        throw std::runtime_error(msg);
    }
    return std::move(*res.score);
}

} // namespace dizi

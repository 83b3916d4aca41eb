#include "dizi/musicxml.hpp"

#include <stdexcept>

#include "dizi/pitch.hpp"

namespace dizi {

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

bool is_triplet_family(long long den) { return den == 3 || den == 6 || den == 12; }

// Note type name for a binary duration in quarters, if it is one.
struct TypeInfo {
    std::string type;
    bool dotted = false;
};

std::optional<TypeInfo> note_type(const Rational& d) {
    // strip the 3:2 tuplet factor first so triplets get their written value
    Rational written = is_triplet_family(d.den) ? d * Rational(3, 2) : d;
    struct Entry {
        long long num, den;
        const char* name;
        bool dotted;
    };
    static const Entry kTable[] = {
        {4, 1, "whole", false},   {6, 1, "whole", true},
        {2, 1, "half", false},    {3, 1, "half", true},
        {1, 1, "quarter", false}, {3, 2, "quarter", true},
        {1, 2, "eighth", false},  {3, 4, "eighth", true},
        {1, 4, "16th", false},    {3, 8, "16th", true},
        {1, 8, "32nd", false},    {3, 16, "32nd", true},
        {1, 16, "64th", false},
    };
    for (const auto& e : kTable)
        if (written.num == e.num && written.den == e.den)
            return TypeInfo{e.name, e.dotted};
    return std::nullopt;
}

} // namespace

std::string export_musicxml(const Score& score) {
    long long divisions = 1;
    for (const auto& m : score.measures)
        for (const auto& n : m.notes) {
            if (!duration_denominator_supported(n.duration))
                throw std::invalid_argument("unrepresentable duration " + n.duration.str());
            divisions = lcm_ll(divisions, n.duration.den);
        }

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" "
           "\"http://www.musicxml.org/dtds/partwise.dtd\">\n";
    out += "<score-partwise version=\"3.1\">\n";
    out += "  <work><work-title>" + xml_escape(score.title) + "</work-title></work>\n";
    out += "  <part-list>\n";
    out += "    <score-part id=\"P1\"><part-name>" + xml_escape(score.title) +
           "</part-name></score-part>\n";
    out += "  </part-list>\n";
    out += "  <part id=\"P1\">\n";

    for (size_t mi = 0; mi < score.measures.size(); ++mi) {
        out += "    <measure number=\"" + std::to_string(mi + 1) + "\">\n";
        if (mi == 0) {
            out += "      <attributes>\n";
            out += "        <divisions>" + std::to_string(divisions) + "</divisions>\n";
            out += "        <key><fifths>" + std::to_string(key_fifths(score.key.tonic_pc)) +
                   "</fifths></key>\n";
            out += "        <time><beats>" + std::to_string(score.time.beats) + "</beats><beat-type>" +
                   std::to_string(score.time.beat_unit) + "</beat-type></time>\n";
            out += "        <clef><sign>G</sign><line>2</line></clef>\n";
            out += "      </attributes>\n";
        }
        for (const auto& n : score.measures[mi].notes) {
            long long ticks = n.duration.num * (divisions / n.duration.den);
            out += "      <note>\n";
            if (n.is_rest()) {
                out += "        <rest/>\n";
            } else {
                int midi = degree_to_midi(n.degree, n.accidental, n.octave_shift, score.key);
                int pc = ((midi % 12) + 12) % 12;
                int octave = (midi - pc) / 12 - 1;
                static const char* kSteps[12] = {"C", "C", "D", "D", "E", "F",
                                                 "F", "G", "G", "A", "A", "B"};
                static const int kAlters[12] = {0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0};
                out += "        <pitch>\n";
                out += std::string("          <step>") + kSteps[pc] + "</step>\n";
                if (kAlters[pc])
                    out += "          <alter>1</alter>\n";
                out += "          <octave>" + std::to_string(octave) + "</octave>\n";
                out += "        </pitch>\n";
            }
            out += "        <duration>" + std::to_string(ticks) + "</duration>\n";
            if (auto t = note_type(n.duration)) {
                out += "        <type>" + t->type + "</type>\n";
                if (t->dotted)
                    out += "        <dot/>\n";
            }
            if (is_triplet_family(n.duration.den))
                out += "        <time-modification><actual-notes>3</actual-notes>"
                       "<normal-notes>2</normal-notes></time-modification>\n";
            if (!n.is_rest() && n.technique != "none")
                out += "        <lyric number=\"1\" placement=\"below\"><text>" +
                       xml_escape(n.technique) + "</text></lyric>\n";
            out += "      </note>\n";
        }
        out += "    </measure>\n";
    }
    out += "  </part>\n";
    out += "</score-partwise>\n";
    return out;
}

} // namespace dizi

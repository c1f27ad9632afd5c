#include "dramcal/address_map.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <sstream>

#include "dramcal/error.hpp"
#include "dramcal/text_io.hpp"

namespace dramcal {

namespace {

constexpr const char* kStage = "address-map";

bool parity(std::uint64_t v) { return (std::popcount(v) & 1) != 0; }

std::uint64_t low_mask(unsigned bits) { return bits >= 64 ? ~0ULL : ((1ULL << bits) - 1); }

unsigned log2_exact(unsigned v) { return static_cast<unsigned>(std::countr_zero(v)); }

bool parse_coord(std::string_view name, Coord& out) {
    for (auto c : kAllCoords) {
        if (coord_name(c) == name) {
            out = c;
            return true;
        }
    }
    return false;
}

}  // namespace

std::string_view coord_name(Coord c) {
    switch (c) {
        case Coord::Channel: return "channel";
        case Coord::Rank: return "rank";
        case Coord::BankGroup: return "bank_group";
        case Coord::Bank: return "bank";
        case Coord::Row: return "row";
        case Coord::Column: return "column";
    }
    return "?";
}

std::uint64_t& DramCoord::operator[](Coord c) {
    switch (c) {
        case Coord::Channel: return channel;
        case Coord::Rank: return rank;
        case Coord::BankGroup: return bank_group;
        case Coord::Bank: return bank;
        case Coord::Row: return row;
        case Coord::Column: return column;
    }
    return channel;
}

std::uint64_t DramCoord::operator[](Coord c) const { return const_cast<DramCoord&>(*this)[c]; }

void validate(const AddressMapping& m) {
    if (m.address_bits == 0 || m.address_bits > kMaxAddressBits)
        throw ValidationError(kStage, "address_bits must be in [1, " + std::to_string(kMaxAddressBits) + "]");
    const auto allowed = low_mask(m.address_bits);
    for (auto c : kAllCoords) {
        if (m[c].size() > 63) throw ValidationError(kStage, std::string(coord_name(c)) + " wider than 63 bits");
        for (std::size_t k = 0; k < m[c].size(); ++k) {
            if (m[c][k].mask & ~allowed)
                throw ValidationError(kStage, std::string(coord_name(c)) + "." + std::to_string(k) +
                                                  " references an address bit >= address_bits");
        }
    }
}

void validate(const AddressMapping& m, const DeviceSpec& d, unsigned bus_bytes) {
    validate(m);
    auto expect = [&](Coord c, unsigned w) {
        if (m.width(c) != w)
            throw ValidationError(kStage, std::string(coord_name(c)) + " width " + std::to_string(m.width(c)) +
                                              " does not match device geometry (" + std::to_string(w) + ")");
    };
    if (!std::has_single_bit(d.ranks)) throw ValidationError(kStage, "rank count must be a power of two to map");
    expect(Coord::Rank, log2_exact(d.ranks));
    expect(Coord::BankGroup, log2_exact(d.bank_groups));
    expect(Coord::Bank, log2_exact(d.banks_per_group()));

    const unsigned offset_bits = log2_exact(d.burst_length * bus_bytes);
    const auto offset_mask = low_mask(offset_bits);
    for (auto c : kAllCoords) {
        for (std::size_t k = 0; k < m[c].size(); ++k) {
            if (m[c][k].mask & offset_mask)
                throw ValidationError(kStage, std::string(coord_name(c)) + "." + std::to_string(k) +
                                                  " uses a byte-offset bit below bit " + std::to_string(offset_bits));
        }
    }
}

DramCoord decompose(const AddressMapping& m, std::uint64_t addr) {
    if (m.address_bits < 64 && (addr >> m.address_bits) != 0)
        throw AddressOutOfRange(kStage, "address " + std::to_string(addr) + " >= 2^" + std::to_string(m.address_bits));
    DramCoord out;
    for (auto c : kAllCoords) {
        std::uint64_t v = 0;
        const auto& fns = m[c];
        for (std::size_t k = 0; k < fns.size(); ++k) {
            if (parity(addr & fns[k].mask) != fns[k].invert) v |= 1ULL << k;
        }
        out[c] = v;
    }
    return out;
}

namespace {

// Row of the augmented system: unknown coefficients (address bits plus the
// constant column at index address_bits) and one right-hand-side bit per
// output bit.
struct Gf2Row {
    std::uint64_t lhs = 0;
    std::vector<std::uint64_t> rhs;
};

struct Reduced {
    std::vector<Gf2Row> rows;          // first `rank` rows hold the RREF
    std::vector<unsigned> pivot_cols;  // per reduced row
};

Reduced reduce_rref(std::vector<Gf2Row> rows, unsigned columns) {
    Reduced out;
    std::size_t pivot_row = 0;
    for (unsigned col = 0; col < columns && pivot_row < rows.size(); ++col) {
        const auto bit = 1ULL << col;
        std::size_t sel = pivot_row;
        while (sel < rows.size() && !(rows[sel].lhs & bit)) ++sel;
        if (sel == rows.size()) continue;
        std::swap(rows[sel], rows[pivot_row]);
        const auto& p = rows[pivot_row];
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r == pivot_row || !(rows[r].lhs & bit)) continue;
            rows[r].lhs ^= p.lhs;
            for (std::size_t w = 0; w < p.rhs.size(); ++w) rows[r].rhs[w] ^= p.rhs[w];
        }
        out.pivot_cols.push_back(col);
        ++pivot_row;
    }
    out.rows = std::move(rows);
    return out;
}

std::uint64_t affine_row(std::uint64_t address, unsigned address_bits) { return address | (1ULL << address_bits); }

}  // namespace

unsigned sample_rank(const std::vector<Sample>& samples, unsigned address_bits) {
    std::vector<Gf2Row> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) rows.push_back({affine_row(s.address, address_bits), {}});
    return static_cast<unsigned>(reduce_rref(std::move(rows), address_bits + 1).pivot_cols.size());
}

InferenceResult infer_mapping(const std::vector<Sample>& samples, const CoordWidths& widths, unsigned address_bits) {
    if (samples.empty()) throw ValidationError(kStage, "inference needs at least one sample");
    if (address_bits == 0 || address_bits > kMaxAddressBits)
        throw ValidationError(kStage, "address_bits must be in [1, " + std::to_string(kMaxAddressBits) + "]");

    // Flatten the output bits: (coord, bit) pairs in coordinate order.
    std::vector<std::pair<Coord, unsigned>> outputs;
    for (auto c : kAllCoords) {
        if (widths[static_cast<std::size_t>(c)] > 63)
            throw ValidationError(kStage, std::string(coord_name(c)) + " wider than 63 bits");
        for (unsigned k = 0; k < widths[static_cast<std::size_t>(c)]; ++k) outputs.emplace_back(c, k);
    }
    const std::size_t words = (outputs.size() + 63) / 64;

    std::vector<Gf2Row> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) {
        if ((s.address >> address_bits) != 0)
            throw AddressOutOfRange(kStage, "sample address " + std::to_string(s.address) + " >= 2^" +
                                                std::to_string(address_bits));
        Gf2Row row{affine_row(s.address, address_bits), std::vector<std::uint64_t>(words, 0)};
        for (std::size_t o = 0; o < outputs.size(); ++o) {
            const auto [c, k] = outputs[o];
            const auto value = s.coord[c];
            if (widths[static_cast<std::size_t>(c)] < 64 && (value >> widths[static_cast<std::size_t>(c)]) != 0)
                throw ValidationError(kStage, std::string(coord_name(c)) + " value " + std::to_string(value) +
                                                  " exceeds its width");
            if ((value >> k) & 1ULL) row.rhs[o / 64] |= 1ULL << (o % 64);
        }
        rows.push_back(std::move(row));
    }

    const unsigned columns = address_bits + 1;
    auto red = reduce_rref(std::move(rows), columns);
    const auto rank = static_cast<unsigned>(red.pivot_cols.size());

    // Zero rows with a set rhs bit are contradictions.
    for (std::size_t r = rank; r < red.rows.size(); ++r) {
        for (std::size_t o = 0; o < outputs.size(); ++o) {
            if ((red.rows[r].rhs[o / 64] >> (o % 64)) & 1ULL) {
                const auto [c, k] = outputs[o];
                throw InconsistentMapping(kStage, std::string(coord_name(c)) + "." + std::to_string(k) +
                                                      " is not an XOR of address bits over the given samples");
            }
        }
    }

    InferenceResult result;
    result.rank = rank;
    result.mapping.address_bits = address_bits;
    for (auto c : kAllCoords) result.mapping[c].resize(widths[static_cast<std::size_t>(c)]);

    const unsigned free_vars = columns - rank;
    for (std::size_t o = 0; o < outputs.size(); ++o) {
        const auto [c, k] = outputs[o];
        BitFunction fn;
        for (unsigned r = 0; r < rank; ++r) {
            if (!((red.rows[r].rhs[o / 64] >> (o % 64)) & 1ULL)) continue;
            const auto col = red.pivot_cols[r];
            if (col == address_bits) fn.invert = true;
            else fn.mask |= 1ULL << col;
        }
        result.mapping[c][k] = fn;
        if (free_vars > 0) result.underdetermined.push_back({c, k, free_vars});
    }
    return result;
}

AddressMapping sequential_mapping(const CoordWidths& widths, unsigned offset_bits) {
    AddressMapping m;
    unsigned next = offset_bits;
    for (auto c : {Coord::Column, Coord::BankGroup, Coord::Bank, Coord::Rank, Coord::Channel, Coord::Row}) {
        for (unsigned k = 0; k < widths[static_cast<std::size_t>(c)]; ++k) m[c].push_back({1ULL << next++, false});
    }
    m.address_bits = next;
    validate(m);
    return m;
}

AddressMapping parse_mapping(std::string_view text_in, const std::string& source) {
    AddressMapping m;
    std::array<std::map<unsigned, BitFunction>, kNumCoords> found;
    bool have_bits = false;

    text::LineReader reader(text_in);
    std::string_view line;
    while (reader.next(line)) {
        const auto ln = reader.line_number();
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(kStage, source, ln, "expected '='");
        const auto lhs = text::trim(line.substr(0, eq));
        auto rhs = text::trim(line.substr(eq + 1));

        if (lhs == "address_bits") {
            std::uint64_t v = 0;
            if (!text::parse_u64(rhs, v) || v == 0 || v > kMaxAddressBits)
                throw ParseError(kStage, source, ln, "bad address_bits");
            m.address_bits = static_cast<unsigned>(v);
            have_bits = true;
            continue;
        }

        const auto dot = lhs.find('.');
        Coord c{};
        std::uint64_t bit = 0;
        if (dot == std::string_view::npos || !parse_coord(lhs.substr(0, dot), c) ||
            !text::parse_u64(lhs.substr(dot + 1), bit) || bit >= 63)
            throw ParseError(kStage, source, ln, "expected <coord>.<bit> on the left");

        BitFunction fn;
        if (rhs.size() >= 2 && rhs.substr(rhs.size() - 2) == "+1") {
            fn.invert = true;
            rhs = text::trim(rhs.substr(0, rhs.size() - 2));
        }
        if (rhs.substr(0, 4) != "xor(" || rhs.back() != ')')
            throw ParseError(kStage, source, ln, "expected xor(a<i>, ...)");
        const auto inner = text::trim(rhs.substr(4, rhs.size() - 5));
        if (!inner.empty()) {
            for (auto term : text::split(inner, ',')) {
                term = text::trim(term);
                std::uint64_t idx = 0;
                if (term.size() < 2 || term.front() != 'a' || !text::parse_u64(term.substr(1), idx) || idx >= 64)
                    throw ParseError(kStage, source, ln, "bad address term '" + std::string(term) + "'");
                fn.mask ^= 1ULL << idx;
            }
        }
        auto& slot = found[static_cast<std::size_t>(c)];
        if (slot.count(static_cast<unsigned>(bit)))
            throw ParseError(kStage, source, ln, "duplicate definition of " + std::string(lhs));
        slot[static_cast<unsigned>(bit)] = fn;
    }
    if (!have_bits) throw ParseError(kStage, source, 0, "missing 'address_bits = N'");

    for (auto c : kAllCoords) {
        const auto& slot = found[static_cast<std::size_t>(c)];
        unsigned k = 0;
        for (const auto& [bit, fn] : slot) {
            if (bit != k)
                throw ParseError(kStage, source, 0, std::string(coord_name(c)) + " bit " + std::to_string(k) + " missing");
            m[c].push_back(fn);
            ++k;
        }
    }
    try {
        validate(m);
    } catch (const ValidationError& e) {
        throw ParseError(kStage, source, 0, e.what());
    }
    return m;
}

AddressMapping load_mapping(const std::filesystem::path& path) {
    return parse_mapping(text::read_file(path, kStage), path.string());
}

std::string serialize_mapping(const AddressMapping& m) {
    std::ostringstream os;
    os << "address_bits = " << m.address_bits << "\n";
    for (auto c : kAllCoords) {
        for (std::size_t k = 0; k < m[c].size(); ++k) {
            os << coord_name(c) << "." << k << " = xor(";
            bool first = true;
            for (unsigned b = 0; b < 64; ++b) {
                if (!((m[c][k].mask >> b) & 1ULL)) continue;
                if (!first) os << ", ";
                os << "a" << b;
                first = false;
            }
            os << ")";
            if (m[c][k].invert) os << " +1";
            os << "\n";
        }
    }
    return os.str();
}

std::vector<Sample> parse_samples_csv(std::string_view text_in, const std::string& source) {
    std::vector<Sample> out;
    text::LineReader reader(text_in);
    std::string_view line;
    bool header_seen = false;
    while (reader.next(line)) {
        const auto ln = reader.line_number();
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = text::split(line, ',');
        if (!header_seen) {
            header_seen = true;
            if (text::trim(fields[0]) == "address") {
                const char* expected[] = {"address", "channel", "rank", "bank_group", "bank", "row", "column"};
                if (fields.size() != 7) throw ParseError(kStage, source, ln, "expected 7 header columns");
                for (std::size_t i = 0; i < 7; ++i) {
                    if (text::trim(fields[i]) != expected[i])
                        throw ParseError(kStage, source, ln, "unexpected header column '" + std::string(fields[i]) + "'");
                }
                continue;
            }
        }
        if (fields.size() != 7) throw ParseError(kStage, source, ln, "expected 7 columns");
        Sample s;
        std::uint64_t v[7];
        for (std::size_t i = 0; i < 7; ++i) {
            if (!text::parse_u64(fields[i], v[i])) throw ParseError(kStage, source, ln, "bad integer field");
        }
        s.address = v[0];
        s.coord = {v[1], v[2], v[3], v[4], v[5], v[6]};
        out.push_back(s);
    }
    return out;
}

}  // namespace dramcal

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dramcal/device_spec.hpp"

namespace dramcal {

enum class Coord : std::size_t { Channel = 0, Rank, BankGroup, Bank, Row, Column };
inline constexpr std::size_t kNumCoords = 6;
inline constexpr std::array<Coord, kNumCoords> kAllCoords{Coord::Channel, Coord::Rank, Coord::BankGroup,
                                                          Coord::Bank,    Coord::Row,  Coord::Column};
std::string_view coord_name(Coord c);

struct DramCoord {
    std::uint64_t channel = 0;
    std::uint64_t rank = 0;
    std::uint64_t bank_group = 0;
    std::uint64_t bank = 0;
    std::uint64_t row = 0;
    std::uint64_t column = 0;

    std::uint64_t& operator[](Coord c);
    std::uint64_t operator[](Coord c) const;
    bool operator==(const DramCoord&) const = default;
};

// One output bit: parity of (address & mask), optionally inverted.
struct BitFunction {
    std::uint64_t mask = 0;
    bool invert = false;

    bool operator==(const BitFunction&) const = default;
};

// XOR-of-address-bits mapping. `bits[c][k]` computes bit k of coordinate c.
struct AddressMapping {
    unsigned address_bits = 0;
    std::array<std::vector<BitFunction>, kNumCoords> bits{};

    std::vector<BitFunction>& operator[](Coord c) { return bits[static_cast<std::size_t>(c)]; }
    const std::vector<BitFunction>& operator[](Coord c) const { return bits[static_cast<std::size_t>(c)]; }
    unsigned width(Coord c) const { return static_cast<unsigned>((*this)[c].size()); }

    bool operator==(const AddressMapping&) const = default;
};

inline constexpr unsigned kMaxAddressBits = 63;

// Masks within address_bits, at most kMaxAddressBits.
void validate(const AddressMapping& mapping);
// Widths match the device geometry and no coordinate other than the column
// reads the byte-within-burst offset bits.
void validate(const AddressMapping& mapping, const DeviceSpec& device, unsigned bus_bytes = 8);

DramCoord decompose(const AddressMapping& mapping, std::uint64_t addr);

using CoordWidths = std::array<unsigned, kNumCoords>;

struct Sample {
    std::uint64_t address = 0;
    DramCoord coord;
};

struct UnderdeterminedBit {
    Coord coord;
    unsigned bit;
    unsigned free_variables;
};

struct InferenceResult {
    AddressMapping mapping;
    unsigned rank = 0;  // of the [address bits | 1] sample matrix over GF(2)
    std::vector<UnderdeterminedBit> underdetermined;
};

// Solves every output bit as an affine GF(2) function of the address bits.
// Free variables resolve to 0. Throws InconsistentMapping when some bit is not
// affine in the address.
InferenceResult infer_mapping(const std::vector<Sample>& samples, const CoordWidths& widths, unsigned address_bits);

// Rank of the affine sample matrix (one row per sample, address_bits + 1 cols).
unsigned sample_rank(const std::vector<Sample>& samples, unsigned address_bits);

// Linear layout, low to high: line offset, column, bank group, bank, rank,
// channel, row.
AddressMapping sequential_mapping(const CoordWidths& widths, unsigned offset_bits = 6);

// Text format, one line per output bit: `bank.0 = xor(a13, a17) +1`.
AddressMapping parse_mapping(std::string_view text, const std::string& source_name = "<string>");
AddressMapping load_mapping(const std::filesystem::path& path);
std::string serialize_mapping(const AddressMapping& mapping);

std::vector<Sample> parse_samples_csv(std::string_view text, const std::string& source_name = "<string>");

}  // namespace dramcal

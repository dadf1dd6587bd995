#pragma once

#include <filesystem>

#include "adfilt/eeg.hpp"

namespace adfilt::eeg {

// ETRC binary trial container (little-endian):
//   magic "ETRC", version u16=1, C u16, T u32, fs f32, K u16, N u32,
//   then N records of { label u16, subject u16, C*T f32 channel-major }.
// Values are stored as 32-bit floats; a round-trip is exact at that
// precision.

void save_dataset(const std::filesystem::path& path, const EegDataset& ds);
EegDataset load_dataset(const std::filesystem::path& path);

/// CSV layout: a manifest (columns file,label,subject,fs) plus one file per
/// trial holding C rows x T comma-separated values.
EegDataset import_csv(const std::filesystem::path& directory,
                      const std::string& manifest_name = "manifest.csv");
void export_csv(const std::filesystem::path& directory, const EegDataset& ds,
                const std::string& manifest_name = "manifest.csv");

}  // namespace adfilt::eeg

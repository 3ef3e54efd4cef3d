#pragma once

#include <filesystem>
#include <vector>

// Row-normalized heat map, one square block per cell, blue scale.
void write_confusion_png(const std::filesystem::path& path, const std::vector<std::vector<long>>& confusion,
                         int cell = 48);

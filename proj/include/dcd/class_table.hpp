/*
 * Copyright 2026 The DCD Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace dcd {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct ClassInfo {
  std::uint8_t index;
  std::string_view abbreviation;
  std::string_view name;
  Rgb color;
};

inline constexpr Rgb kBackgroundColor{0, 0, 0};

// Fetal apical four-chamber structures, indexed 1..13, with their overlay
// colours.
inline constexpr std::array<ClassInfo, 13> kClassTable{{
    {1, "SP", "Spine", {128, 0, 0}},                     // maroon
    {2, "RiB", "Ribs", {0, 128, 0}},                     // green
    {3, "LA", "Left Atrium", {128, 128, 0}},             // olive
    {4, "IS", "Interatrial Septum", {0, 0, 128}},        // navy
    {5, "RA", "Right Atrium", {128, 0, 128}},            // purple
    {6, "RV", "Right Ventricle", {0, 128, 128}},         // teal
    {7, "LV", "Left Ventricle", {128, 128, 128}},        // gray
    {8, "VS", "Ventricular Septum", {139, 0, 0}},        // dark red
    {9, "LVW", "Left Ventricular Wall", {255, 0, 0}},    // bright red
    {10, "RVW", "Right Ventricular Wall", {85, 107, 47}},  // dark olive green
    {11, "DAO", "Descending Aorta", {255, 140, 0}},      // dark orange
    {12, "RL", "Right Lung", {75, 0, 130}},              // indigo
    {13, "LL", "Left Lung", {255, 20, 147}},             // deep pink
}};

inline Rgb class_color(std::uint8_t index) {
  if (index == 0 || index > kClassTable.size()) return kBackgroundColor;
  return kClassTable[index - 1].color;
}

inline std::optional<ClassInfo> class_info(std::uint8_t index) {
  if (index == 0 || index > kClassTable.size()) return std::nullopt;
  return kClassTable[index - 1];
}

}  // namespace dcd

// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file weathersplat.hpp
/// @brief Umbrella header.

#pragma once

#include "weathersplat/camera.hpp"
#include "weathersplat/camera_path.hpp"
#include "weathersplat/config.hpp"
#include "weathersplat/core.hpp"
#include "weathersplat/dynamic_weather.hpp"
#include "weathersplat/geometry_losses.hpp"
#include "weathersplat/image_io.hpp"
#include "weathersplat/kdtree.hpp"
#include "weathersplat/parallel.hpp"
#include "weathersplat/pipeline.hpp"
#include "weathersplat/ply.hpp"
#include "weathersplat/rasterizer.hpp"
#include "weathersplat/scene.hpp"
#include "weathersplat/snow_accumulation.hpp"
#include "weathersplat/static_weather.hpp"

#pragma once

#include "arena.hpp"
#include "bench.hpp"
#include "config.hpp"
#include "engine.hpp"
#include "errors.hpp"
#include "executor.hpp"
#include "io.hpp"
#include "model.hpp"
#include "partition.hpp"
#include "rng.hpp"
#include "space.hpp"
#include "text.hpp"
#include "world.hpp"

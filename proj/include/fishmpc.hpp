#pragma once

#include "fishmpc/error.hpp"
#include "fishmpc/vec3.hpp"
#include "fishmpc/school.hpp"
#include "fishmpc/network.hpp"
#include "fishmpc/reduction.hpp"
#include "fishmpc/sampling.hpp"
#include "fishmpc/optimizer.hpp"
#include "fishmpc/mpc.hpp"
#include "fishmpc/json_io.hpp"
#include "fishmpc/audit.hpp"
#include "fishmpc/experiments.hpp"

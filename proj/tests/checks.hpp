#pragma once

#include "offload/testing.hpp"

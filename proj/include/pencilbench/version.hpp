#pragma once

#define PENCILBENCH_VERSION "0.1.0"

"""Object-aware Gaussian splatting on CPU.

A desk-scale engine that lifts 2D object-ID maps onto a 3D point cloud by
voting, grows object-tagged voxel anchors whose neural heads emit Gaussian
primitives, renders RGB plus per-object semantic probability channels
through a differentiable rasterizer, and supports object-level query and
editing of the trained model.
"""

__version__ = "0.1.0"

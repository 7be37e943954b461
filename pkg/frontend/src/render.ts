/** Three.js shell around the session.
 *
 * Everything with an opinion lives in session.ts and colormap.ts; this
 * file only moves buffers into GPU attributes and projects points for
 * picking. It is deliberately untested (it needs a WebGL context) and
 * kept too thin to hide logic.
 */

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";

import type { Aabb, Vec3 } from "./types.js";
import type { Projected, ProjectFn } from "./picking.js";

const BASE_POINT_COLOR: Vec3 = [0.62, 0.64, 0.68];
const HIGHLIGHT_COLOR: Vec3 = [1.0, 0.42, 0.1];

function disposeChildren(group: THREE.Group): void {
  for (const child of [...group.children]) {
    group.remove(child);
    const mesh = child as Partial<THREE.Mesh>;
    if (mesh.geometry) mesh.geometry.dispose();
    if (mesh.material) (mesh.material as THREE.Material).dispose();
  }
}

export class MapRenderer {
  private readonly canvas: HTMLCanvasElement;
  private readonly renderer: THREE.WebGLRenderer;
  private readonly scene: THREE.Scene;
  private readonly camera: THREE.PerspectiveCamera;
  private readonly controls: OrbitControls;
  private points: THREE.Points | null = null;
  private readonly annotationGroup = new THREE.Group();
  private readonly clusterGroup = new THREE.Group();

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.scene = new THREE.Scene();
    this.scene.background = new THREE.Color(0x14161a);
    this.camera = new THREE.PerspectiveCamera(55, 1, 0.01, 100);
    this.camera.position.set(0, -1.5, 1.2);
    this.camera.up.set(0, 0, 1);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.target.set(0, 0, 0);
    this.scene.add(this.annotationGroup);
    this.scene.add(this.clusterGroup);
    this.resize();
    window.addEventListener("resize", () => this.resize());
  }

  private resize(): void {
    const width = this.canvas.clientWidth || this.canvas.width;
    const height = this.canvas.clientHeight || this.canvas.height;
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  /** Replace the drawn point cloud. `positions` is a flat xyz buffer;
   * `colors` is a flat rgb buffer of the same point count, 0..1. */
  setPoints(positions: Float32Array, colors: Float32Array): void {
    if (this.points !== null) {
      this.scene.remove(this.points);
      this.points.geometry.dispose();
      (this.points.material as THREE.Material).dispose();
    }
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    geometry.setAttribute("color", new THREE.BufferAttribute(colors, 3));
    geometry.computeBoundingSphere();
    const material = new THREE.PointsMaterial({ size: 0.015, vertexColors: true });
    this.points = new THREE.Points(geometry, material);
    this.scene.add(this.points);

    const sphere = geometry.boundingSphere;
    if (sphere !== null) {
      this.controls.target.copy(sphere.center);
      this.controls.update();
    }
  }

  /** Update only the color attribute in place. */
  setColors(colors: Float32Array): void {
    if (this.points === null) return;
    const attr = this.points.geometry.getAttribute("color") as THREE.BufferAttribute;
    (attr.array as Float32Array).set(colors);
    attr.needsUpdate = true;
  }

  /** Draw the measurement annotation: a line between the two centroids
   * with a small marker at each end. */
  setLine(a: Vec3, b: Vec3): void {
    this.clearLine();
    const ends = [new THREE.Vector3(...a), new THREE.Vector3(...b)];
    const line = new THREE.Line(
      new THREE.BufferGeometry().setFromPoints(ends),
      new THREE.LineBasicMaterial({ color: 0xffd24a }),
    );
    this.annotationGroup.add(line);
    for (const end of ends) {
      const marker = new THREE.Mesh(
        new THREE.SphereGeometry(0.02, 12, 8),
        new THREE.MeshBasicMaterial({ color: 0xffd24a }),
      );
      marker.position.copy(end);
      this.annotationGroup.add(marker);
    }
  }

  clearLine(): void {
    disposeChildren(this.annotationGroup);
  }

  /** Outline each returned cluster's bounding box; the selected one, if
   * any, is drawn brighter. */
  setClusterBoxes(boxes: readonly Aabb[], selected: number | null): void {
    disposeChildren(this.clusterGroup);
    boxes.forEach((aabb, i) => {
      const box = new THREE.Box3(
        new THREE.Vector3(...aabb.min),
        new THREE.Vector3(...aabb.max),
      );
      const color = i === selected ? 0xffffff : 0x58d0ff;
      this.clusterGroup.add(new THREE.Box3Helper(box, color));
    });
  }

  /** Projection callback for picking: world point to canvas pixels, with
   * camera-space depth; null for points behind the camera. */
  projector(): ProjectFn {
    this.camera.updateMatrixWorld();
    const width = this.canvas.clientWidth || this.canvas.width;
    const height = this.canvas.clientHeight || this.canvas.height;
    const view = this.camera.matrixWorldInverse;
    return (x: number, y: number, z: number): Projected | null => {
      const inCamera = new THREE.Vector3(x, y, z).applyMatrix4(view);
      if (inCamera.z >= 0) return null;
      const ndc = new THREE.Vector3(x, y, z).project(this.camera);
      return {
        x: ((ndc.x + 1) / 2) * width,
        y: ((1 - ndc.y) / 2) * height,
        depth: -inCamera.z,
      };
    };
  }

  /** Screen position for a world point, for DOM label placement. */
  toScreen(p: Vec3): Projected | null {
    return this.projector()(p[0], p[1], p[2]);
  }

  start(): void {
    const tick = () => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }

  get colorMix(): { base: Vec3; highlight: Vec3 } {
    return { base: BASE_POINT_COLOR, highlight: HIGHLIGHT_COLOR };
  }
}

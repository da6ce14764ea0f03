import { layoutProcess } from "bpmn-auto-layout";

// The service exports BPMN without diagram interchange; the viewer needs
// coordinates, so layout runs client-side before import.

export async function withAutoLayout(bpmnXml: string): Promise<string> {
  return layoutProcess(bpmnXml);
}

export interface DiagramHandle {
  destroy(): void;
}

/** Render into `container` with bpmn-js; resolved lazily so that logic tests
 * never pull the viewer in. */
export async function renderDiagram(
  container: HTMLElement,
  bpmnXml: string,
): Promise<DiagramHandle> {
  const laidOut = await withAutoLayout(bpmnXml);
  const { default: Viewer } = await import("bpmn-js/lib/NavigatedViewer");
  const viewer = new Viewer({ container });
  await viewer.importXML(laidOut);
  const canvas = viewer.get("canvas") as { zoom(mode: string): void };
  canvas.zoom("fit-viewport");
  return { destroy: () => viewer.destroy() };
}

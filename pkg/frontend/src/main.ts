import { WorkbenchApp } from './app.js';

const mount = document.getElementById('workbench');
if (mount === null) {
  console.warn('no #workbench element on this page; nothing to mount');
} else {
  mount.appendChild(new WorkbenchApp().element);
}

x = 1;
y = x * 2;
if (y > 1) { z = y; }
